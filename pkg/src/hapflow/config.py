"""Run configuration shared by both engines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidConfig

ENGINE_SEQUENTIAL = "sequential"
ENGINE_MAPREDUCE = "mapreduce"
SCHEDULE_GAUSS_SEIDEL = "gauss-seidel"
SCHEDULE_JACOBI = "jacobi"


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one clustering run.

    damping is the mixing factor applied to rho and alpha updates
    (out = damping * old + (1 - damping) * new). kappa, when not None,
    enables the optional per-iteration similarity level update with that
    strength. The mapreduce engine always runs the jacobi schedule; the
    sequential engine defaults to gauss-seidel and can run jacobi to mirror
    the mapreduce dataflow exactly.
    """

    levels: int = 1
    iterations: int = 30
    damping: float = 0.5
    kappa: float | None = None
    seed: int = 0
    engine: str = ENGINE_SEQUENTIAL
    schedule: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.levels < 1:
            raise InvalidConfig(f"levels must be >= 1, got {self.levels}")
        if self.iterations < 1:
            raise InvalidConfig(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.damping < 1.0:
            raise InvalidConfig(
                f"damping must lie strictly inside (0, 1), got {self.damping}"
            )
        if self.kappa is not None and not 0.0 <= self.kappa <= 1.0:
            raise InvalidConfig(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.engine not in (ENGINE_SEQUENTIAL, ENGINE_MAPREDUCE):
            raise InvalidConfig(f"unknown engine {self.engine!r}")
        if self.schedule not in (None, SCHEDULE_GAUSS_SEIDEL, SCHEDULE_JACOBI):
            raise InvalidConfig(f"unknown schedule {self.schedule!r}")
        if self.engine == ENGINE_MAPREDUCE and self.schedule == SCHEDULE_GAUSS_SEIDEL:
            raise InvalidConfig("the mapreduce engine only runs the jacobi schedule")
        if self.workers < 1:
            raise InvalidConfig(f"workers must be >= 1, got {self.workers}")

    def resolved_schedule(self) -> str:
        if self.schedule is not None:
            return self.schedule
        if self.engine == ENGINE_MAPREDUCE:
            return SCHEDULE_JACOBI
        return SCHEDULE_GAUSS_SEIDEL

    def with_updates(self, **kw) -> "RunConfig":
        return replace(self, **kw)
