"""Cluster quality and runtime reporting.

Purity is the lone extrinsic quality measure: each cluster votes its
majority class and the matching points are counted. Level statistics
summarize how many exemplars a level selected and how cluster sizes are
distributed. The scaling report turns (workers, wall time) measurements
into speedup factors.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTimings, LengthMismatch
from .tensors import AssignmentTable


def purity(assignments, labels) -> float:
    """Fraction of points whose cluster's majority class is their own.

    Sums the majority-class count over clusters and divides by N. Equal to
    1.0 when every cluster is class-pure, degenerating to 1.0 when every
    point sits alone. Invariant under relabeling either side.
    """
    a = list(assignments)
    b = list(labels)
    if len(a) != len(b):
        raise LengthMismatch(
            f"{len(a)} assignments vs {len(b)} labels"
        )
    if not a:
        raise LengthMismatch("purity needs at least one point")
    per_cluster: dict = {}
    for cluster, cls in zip(a, b):
        per_cluster.setdefault(cluster, Counter())[cls] += 1
    hits = sum(max(counts.values()) for counts in per_cluster.values())
    return hits / len(a)


@dataclass
class PurityReport:
    """Per-level purity, exemplar counts, and cluster-by-class contingency."""

    purities: list[float]
    exemplar_counts: list[int]
    contingency: list[dict]  # per level: {cluster id: {class id: count}}

    @property
    def levels(self) -> int:
        return len(self.purities)

    def machine_lines(self) -> list[str]:
        return [
            f"{lv + 1}\t{self.purities[lv]!r}\t{self.exemplar_counts[lv]}"
            for lv in range(self.levels)
        ]

    def text(self) -> str:
        rows = [("level", "purity", "exemplars")]
        for lv in range(self.levels):
            rows.append(
                (str(lv + 1), f"{self.purities[lv]:.6f}", str(self.exemplar_counts[lv]))
            )
        return _align(rows)


def purity_report(table: AssignmentTable, labels) -> PurityReport:
    """Evaluate purity at every level of an assignment table."""
    lab = list(labels)
    if len(lab) != table.n:
        raise LengthMismatch(f"{len(lab)} labels for {table.n} points")
    purities: list[float] = []
    counts: list[int] = []
    contingency: list[dict] = []
    for lv in range(1, table.levels + 1):
        assign = table.level(lv)
        purities.append(purity(assign.tolist(), lab))
        counts.append(len(table.exemplar_set(lv)))
        per_cluster: dict = {}
        for cluster, cls in zip(assign.tolist(), lab):
            per_cluster.setdefault(cluster, {})
            per_cluster[cluster][cls] = per_cluster[cluster].get(cls, 0) + 1
        contingency.append(per_cluster)
    return PurityReport(purities, counts, contingency)


def level_stats(table: AssignmentTable) -> list[tuple[int, dict[int, int]]]:
    """Per level: (exemplar count, {cluster size: clusters of that size})."""
    out = []
    for lv in range(1, table.levels + 1):
        sizes = Counter(table.level(lv).tolist())
        hist = Counter(sizes.values())
        out.append((len(sizes), dict(sorted(hist.items()))))
    return out


def format_level_stats(table: AssignmentTable) -> str:
    rows = [("level", "exemplars", "size histogram")]
    for lv, (count, hist) in enumerate(level_stats(table), start=1):
        pretty = ", ".join(f"{size}x{num}" for size, num in hist.items())
        rows.append((str(lv), str(count), pretty))
    return _align(rows)


@dataclass
class ScalingReport:
    """Wall time vs worker count with speedups relative to one worker."""

    rows: list[tuple[int, float, float]]  # (workers, wall_ms, speedup)
    monotone: bool

    def text(self) -> str:
        table = [("workers", "wall_ms", "speedup")]
        for workers, wall, speedup in self.rows:
            table.append((str(workers), f"{wall:.1f}", f"{speedup:.2f}"))
        flag = "yes" if self.monotone else "no"
        return _align(table) + f"\nwall time monotone non-increasing: {flag}"


def scaling_report(timings) -> ScalingReport:
    """Build the speedup table from (workers, wall_ms) measurements.

    Needs at least two entries. Speedup is wall(1)/wall(w); when no
    single-worker entry exists the smallest worker count is the baseline.
    """
    entries = sorted((int(w), float(t)) for w, t in timings)
    if len(entries) < 2:
        raise InsufficientTimings(
            f"scaling report needs >= 2 timing entries, got {len(entries)}"
        )
    baseline = dict(entries).get(1, entries[0][1])
    rows = [(w, t, baseline / t) for w, t in entries]
    walls = [t for _, t in entries]
    monotone = all(b <= a for a, b in zip(walls, walls[1:]))
    return ScalingReport(rows, monotone)


def _align(rows: list[tuple]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    )
