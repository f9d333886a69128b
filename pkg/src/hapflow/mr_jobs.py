"""The clustering pipeline as three chained map/reduce jobs.

One iteration is two jobs. The first consumes the exemplar-based state
(matrix columns), regroups it by node, and refreshes the up-level support
tau, the cluster preference c, and the responsibility rho; its output is
node-based (matrix rows). The second consumes that, regroups by candidate
exemplar, and refreshes the down-level support phi and the availability
alpha, restoring the exemplar-based layout. The two jobs alternate for the
configured number of iterations, and a final third job reads only alpha
and rho to extract each point's exemplar per level.

Because every value a reducer reads was written by the previous job, each
update sees the previous iteration's messages except along the explicit
forward edges (responsibility reads the tau refreshed moments earlier in
the same reducer; availability reads the rho, c, and phi of the current
iteration). The sequential engine's jacobi schedule reproduces exactly
this staleness pattern, which makes it a bit-level oracle for the
pipeline.

Tensors a job does not update pass straight through it, so every job
boundary is a complete state snapshot and doubles as a restart point.
Cross-level traffic rides on auxiliary scalars: the first job's mapper
holds whole columns, so it pre-aggregates the positive-part sum each tau
needs and ships 2 scalars per column instead of N. With the similarity
level update enabled, the second job's reducer also emits an alpha+rho
column (it holds both), which the next iteration's first job routes one
level up to rebuild that level's similarity rows.

tau and c are not refreshed during iteration 1: at that point they still
hold their initial values (+inf and 0), and the first refresh would read
messages that do not exist yet. The mappers route the aux scalars anyway;
the reducer ignores them until iteration 2.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .config import SCHEDULE_JACOBI, RunConfig
from .errors import (
    DuplicateKey,
    InvalidConfig,
    MissingAux,
    MissingRecord,
)
from .mr_runtime import JobSpec, execute, worker_pool
from .tensors import (
    ORIENT_EXEMPLAR,
    ORIENT_NODE,
    TAG_ALPHA,
    TAG_AUX,
    TAG_C,
    TAG_PHI,
    TAG_RHO,
    TAG_S,
    TAG_TAU,
    AssignmentTable,
    KeyedRecord,
    MessageState,
    RecordKey,
    ScalarPayload,
    SimilarityTensor,
    from_records,
    init_state,
    read_spill,
    to_records,
    write_spill,
)

# Intermediate value kinds. Tensor elements travel under their tensor tag;
# routed auxiliary scalars are self-describing so reconstruction is
# order-free.
AUX_TAU_SUM = "tau-partial-sum"
AUX_TAU_DIAG = "tau-diag"
AUX_TAU_C = "c-scalar"
AUX_PHI_ALPHA = "phi-partial-alpha"
AUX_PHI_S = "phi-partial-s"
AUX_S_BELOW = "s-below"
AUX_SHIFT = "shift-term"


@dataclass(frozen=True)
class PipelineParams:
    """Shape and update constants every mapper and reducer needs."""

    levels: int
    n: int
    damping: float
    kappa: "float | None" = None


def _collect(values) -> dict[str, list]:
    by_kind: dict[str, list] = {}
    for kind, src, val in values:
        by_kind.setdefault(kind, []).append((src, val))
    return by_kind


def _gather(by_kind: dict, kind: str, n: int, where: str, aux: bool = False):
    """Reassemble a length-n vector from (source, value) pairs."""
    got = by_kind.get(kind)
    if got is None or len(got) != n:
        err = MissingAux if aux else MissingRecord
        raise err(
            f"{where}: kind {kind!r} has {0 if got is None else len(got)} "
            f"of {n} elements"
        )
    out = np.empty(n, dtype=np.float64)
    for pos, (src, val) in enumerate(got):
        if src != pos:
            err = MissingAux if aux else MissingRecord
            raise err(f"{where}: kind {kind!r} misses source {pos}")
        out[pos] = val
    return out


def _single(by_kind: dict, kind: str, where: str, aux: bool = False) -> float:
    got = by_kind.get(kind)
    if got is None or not got:
        err = MissingAux if aux else MissingRecord
        raise err(f"{where}: kind {kind!r} absent")
    if len(got) > 1:
        raise DuplicateKey(f"{where}: kind {kind!r} arrived {len(got)} times")
    return got[0][1]


@dataclass(frozen=True)
class SupportResponsibilityMapper:
    """Job 1 mapper: exemplar-based records to node-keyed elements.

    Each column element lands on the key of the row it belongs to. A rho
    column additionally ships its positive-part total and its diagonal one
    level up (the inputs of the tau update there), and the c vector ships
    each c_j one level up. With the similarity level update armed, the
    alpha+rho columns of the previous iteration and a copy of this level's
    s columns go one level up as well.
    """

    params: PipelineParams
    iteration: int

    def __call__(self, rec: KeyedRecord):
        p = self.params
        k = rec.key
        lvl = k.level
        vec = rec.value
        vals = vec.tolist()
        shift_active = p.kappa is not None and self.iteration >= 2
        if k.tag == TAG_S:
            j = k.index
            if not (shift_active and lvl >= 2):
                for i, x in enumerate(vals):
                    yield ((i, lvl), (TAG_S, j, x))
            if shift_active and lvl < p.levels:
                for i, x in enumerate(vals):
                    yield ((i, lvl + 1), (AUX_S_BELOW, j, x))
        elif k.tag == TAG_ALPHA:
            j = k.index
            for i, x in enumerate(vals):
                yield ((i, lvl), (TAG_ALPHA, j, x))
        elif k.tag == TAG_RHO:
            j = k.index
            for i, x in enumerate(vals):
                yield ((i, lvl), (TAG_RHO, j, x))
            if lvl < p.levels:
                total = kernels.positive_total(vec)
                yield ((j, lvl + 1), (AUX_TAU_SUM, j, float(total)))
                yield ((j, lvl + 1), (AUX_TAU_DIAG, j, vals[j]))
        elif k.tag == TAG_TAU:
            for i, x in enumerate(vals):
                yield ((i, lvl), (TAG_TAU, 0, x))
        elif k.tag == TAG_PHI:
            for i, x in enumerate(vals):
                yield ((i, lvl), (TAG_PHI, 0, x))
        elif k.tag == TAG_C:
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_C, 0, x))
            if lvl < p.levels:
                for j, x in enumerate(vals):
                    yield ((j, lvl + 1), (AUX_TAU_C, j, x))
        elif k.tag == TAG_AUX:
            if shift_active and lvl < p.levels:
                j = k.index
                for i, x in enumerate(vals):
                    yield ((i, lvl + 1), (AUX_SHIFT, j, x))


@dataclass(frozen=True)
class SupportResponsibilityReducer:
    """Job 1 reducer for key (i, l): new tau, c, and rho row for node i.

    tau and c keep their incoming values during iteration 1. From
    iteration 2 on, c_i is the max of alpha+rho over the reassembled rows
    and tau_i (levels above the first) combines the c, diagonal, and
    positive-part sum routed from the level below. The responsibility row
    is recomputed against the fresh tau and damped against the old row;
    everything else passes through.
    """

    params: PipelineParams
    iteration: int

    def __call__(self, ikey, values):
        p = self.params
        i, lvl = ikey
        n = p.n
        where = f"support-responsibility reducer ({i}, {lvl})"
        d = _collect(values)
        a_row = _gather(d, TAG_ALPHA, n, where)
        r_row = _gather(d, TAG_RHO, n, where)
        tau_in = _single(d, TAG_TAU, where)
        phi_in = _single(d, TAG_PHI, where)
        c_in = _single(d, TAG_C, where)

        shift_active = p.kappa is not None and self.iteration >= 2
        if shift_active and lvl >= 2:
            s_row = kernels.shift_and_clamp(
                _gather(d, AUX_S_BELOW, n, where, aux=True),
                i,
                _gather(d, AUX_SHIFT, n, where, aux=True),
                p.kappa,
            )
        else:
            s_row = _gather(d, TAG_S, n, where)

        if self.iteration >= 2 and lvl >= 2:
            tau_out = kernels.tau_from_parts(
                _single(d, AUX_TAU_C, where, aux=True),
                _single(d, AUX_TAU_DIAG, where, aux=True),
                _single(d, AUX_TAU_SUM, where, aux=True),
            )
        else:
            tau_out = tau_in
        if self.iteration >= 2:
            c_out = float(kernels.cluster_preference(a_row, r_row))
        else:
            c_out = c_in

        if n >= 2:
            raw = kernels.responsibility_row(s_row, a_row, tau_out)
            r_out = kernels.damp(r_row, raw, p.damping)
        else:
            r_out = r_row

        yield KeyedRecord(RecordKey(i, lvl, TAG_S, ORIENT_NODE), s_row)
        yield KeyedRecord(RecordKey(i, lvl, TAG_ALPHA, ORIENT_NODE), a_row)
        yield KeyedRecord(RecordKey(i, lvl, TAG_RHO, ORIENT_NODE), r_out)
        yield KeyedRecord(
            RecordKey(i, lvl, TAG_TAU, ORIENT_NODE),
            ScalarPayload(i, "tau", float(tau_out)),
        )
        yield KeyedRecord(
            RecordKey(i, lvl, TAG_PHI, ORIENT_NODE),
            ScalarPayload(i, "phi", float(phi_in)),
        )
        yield KeyedRecord(
            RecordKey(i, lvl, TAG_C, ORIENT_NODE),
            ScalarPayload(i, "c", c_out),
        )


@dataclass(frozen=True)
class SupportAvailabilityMapper:
    """Job 2 mapper: node-based records to exemplar-keyed elements.

    Row elements land on the key of the column they belong to. Alpha and s
    rows additionally ship their elements one level down, where they are
    the inputs of that level's phi update. Incoming phi vectors are
    dropped: every phi is recomputed each iteration.
    """

    params: PipelineParams

    def __call__(self, rec: KeyedRecord):
        k = rec.key
        lvl = k.level
        vals = rec.value.tolist()
        if k.tag == TAG_S:
            i = k.index
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_S, i, x))
            if lvl >= 2:
                for j, x in enumerate(vals):
                    yield ((i, lvl - 1), (AUX_PHI_S, j, x))
        elif k.tag == TAG_ALPHA:
            i = k.index
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_ALPHA, i, x))
            if lvl >= 2:
                for j, x in enumerate(vals):
                    yield ((i, lvl - 1), (AUX_PHI_ALPHA, j, x))
        elif k.tag == TAG_RHO:
            i = k.index
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_RHO, i, x))
        elif k.tag == TAG_TAU:
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_TAU, 0, x))
        elif k.tag == TAG_C:
            for j, x in enumerate(vals):
                yield ((j, lvl), (TAG_C, 0, x))


@dataclass(frozen=True)
class SupportAvailabilityReducer:
    """Job 2 reducer for key (j, l): new phi and alpha column for j.

    phi_j is the max of alpha+s over the routed row from the level above,
    or exactly 0 at the top level. The availability column is recomputed
    from the fresh rho, c, and phi, then damped against the old column.
    With the similarity level update armed, the alpha+rho column also goes
    out as an auxiliary record for the next iteration's level-up shift.
    """

    params: PipelineParams

    def __call__(self, ikey, values):
        p = self.params
        j, lvl = ikey
        n = p.n
        where = f"support-availability reducer ({j}, {lvl})"
        d = _collect(values)
        s_col = _gather(d, TAG_S, n, where)
        a_col = _gather(d, TAG_ALPHA, n, where)
        r_col = _gather(d, TAG_RHO, n, where)
        tau_j = _single(d, TAG_TAU, where)
        c_j = _single(d, TAG_C, where)

        if lvl < p.levels:
            phi_j = float(
                kernels.phi_prev(
                    _gather(d, AUX_PHI_ALPHA, n, where, aux=True),
                    _gather(d, AUX_PHI_S, n, where, aux=True),
                )
            )
        else:
            phi_j = 0.0

        raw = kernels.availability_column(r_col, j, c_j, phi_j)
        a_out = kernels.damp(a_col, raw, p.damping)

        yield KeyedRecord(RecordKey(j, lvl, TAG_S, ORIENT_EXEMPLAR), s_col)
        yield KeyedRecord(RecordKey(j, lvl, TAG_ALPHA, ORIENT_EXEMPLAR), a_out)
        yield KeyedRecord(RecordKey(j, lvl, TAG_RHO, ORIENT_EXEMPLAR), r_col)
        yield KeyedRecord(
            RecordKey(j, lvl, TAG_TAU, ORIENT_EXEMPLAR),
            ScalarPayload(j, "tau", float(tau_j)),
        )
        yield KeyedRecord(
            RecordKey(j, lvl, TAG_PHI, ORIENT_EXEMPLAR),
            ScalarPayload(j, "phi", phi_j),
        )
        yield KeyedRecord(
            RecordKey(j, lvl, TAG_C, ORIENT_EXEMPLAR),
            ScalarPayload(j, "c", float(c_j)),
        )
        if p.kappa is not None and lvl < p.levels:
            yield KeyedRecord(
                RecordKey(j, lvl, TAG_AUX, ORIENT_EXEMPLAR), a_out + r_col
            )


@dataclass(frozen=True)
class AssignmentMapper:
    """Job 3 mapper: keeps only alpha and rho elements, keyed by node."""

    params: PipelineParams

    def __call__(self, rec: KeyedRecord):
        k = rec.key
        if k.tag not in (TAG_ALPHA, TAG_RHO):
            return
        j = k.index
        for i, x in enumerate(rec.value.tolist()):
            yield ((i, k.level), (k.tag, j, x))


@dataclass(frozen=True)
class AssignmentReducer:
    """Job 3 reducer: argmax of alpha+rho per node row, ties to lowest."""

    params: PipelineParams

    def __call__(self, ikey, values):
        i, lvl = ikey
        n = self.params.n
        where = f"assignment reducer ({i}, {lvl})"
        d = _collect(values)
        e = kernels.extract_exemplar(
            _gather(d, TAG_ALPHA, n, where), _gather(d, TAG_RHO, n, where)
        )
        yield KeyedRecord(
            RecordKey(i, lvl, TAG_AUX, ORIENT_NODE),
            ScalarPayload(i, "assignment", float(e)),
        )


def job1_rho_c_tau(
    iteration: int,
    params: PipelineParams,
    input: "str | list | None" = None,
    output: "str | None" = None,
) -> JobSpec:
    """Exemplar-based state in, node-based state with fresh tau/c/rho out."""
    if iteration < 1:
        raise InvalidConfig(f"iteration must be >= 1, got {iteration}")
    return JobSpec(
        name=f"rho-c-tau-{iteration:03d}",
        mapper=SupportResponsibilityMapper(params, iteration),
        reducer=SupportResponsibilityReducer(params, iteration),
        input=input,
        output=output,
    )


def job2_alpha_phi(
    iteration: int,
    params: PipelineParams,
    input: "str | list | None" = None,
    output: "str | None" = None,
) -> JobSpec:
    """Node-based state in, exemplar-based state with fresh phi/alpha out."""
    return JobSpec(
        name=f"alpha-phi-{iteration:03d}",
        mapper=SupportAvailabilityMapper(params),
        reducer=SupportAvailabilityReducer(params),
        input=input,
        output=output,
    )


def job3_extract(
    params: PipelineParams,
    input: "str | list | None" = None,
) -> JobSpec:
    """Exemplar-based state in, one assignment record per (point, level) out."""
    return JobSpec(
        name="extract",
        mapper=AssignmentMapper(params),
        reducer=AssignmentReducer(params),
        input=input,
        output=None,
    )


def _fingerprint(s: SimilarityTensor, cfg: RunConfig) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(s.values.shape, dtype=np.int64).tobytes())
    h.update(s.values.tobytes())
    h.update(f"{cfg.damping!r}|{cfg.kappa!r}".encode())
    return h.hexdigest()[:16]


def _decode_assignments(records: list[KeyedRecord], levels: int, n: int) -> AssignmentTable:
    arr = np.zeros((levels, n), dtype=np.int64)
    seen = 0
    for rec in records:
        k = rec.key
        arr[k.level - 1, k.index] = int(rec.value.value)
        seen += 1
    if seen != levels * n:
        raise MissingRecord(
            f"assignment stream has {seen} records, expected {levels * n}"
        )
    return AssignmentTable(arr)


def drive(
    s: SimilarityTensor,
    cfg: RunConfig,
    workdir: "str | None" = None,
    timings: "list | None" = None,
    stop_after: "int | None" = None,
) -> tuple[MessageState, AssignmentTable]:
    """Run the full pipeline: seed spill, 2 jobs per iteration, extract.

    Every job boundary is persisted as a spill file under `workdir` (a
    temporary directory when omitted) and registered in a manifest, so a
    run killed between any two jobs resumes from the last completed one
    and still produces bitwise-identical output. `stop_after` truncates
    the run after that many iterations (the extract job still runs).
    Appends (iteration, job, wall_ms) to `timings` for every executed job.
    """
    if s.levels != cfg.levels:
        raise InvalidConfig(
            f"config says {cfg.levels} levels but the tensor has {s.levels}"
        )
    if cfg.resolved_schedule() != SCHEDULE_JACOBI:
        raise InvalidConfig("the pipeline engine only runs the jacobi schedule")
    iterations = cfg.iterations if stop_after is None else min(stop_after, cfg.iterations)
    params = PipelineParams(
        levels=s.levels, n=s.n, damping=cfg.damping, kappa=cfg.kappa
    )

    tmp = None
    if workdir is None:
        tmp = tempfile.mkdtemp(prefix="pipeline-")
        workdir = tmp
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    manifest_path = wd / "drive-manifest.json"
    fingerprint = _fingerprint(s, cfg)
    manifest: dict = {"fingerprint": fingerprint, "completed": {}}
    if manifest_path.exists():
        try:
            loaded = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError):
            loaded = None
        if loaded is not None:
            if loaded.get("fingerprint") != fingerprint:
                raise InvalidConfig(
                    f"workdir {workdir} holds spills of a different run"
                )
            manifest = loaded
    completed: dict = manifest["completed"]

    def done(marker: str, path: Path) -> bool:
        return marker in completed and path.exists()

    def mark(marker: str, path: Path) -> None:
        completed[marker] = str(path)
        manifest_path.write_text(json.dumps(manifest, indent=2))

    pool = worker_pool(cfg.workers) if cfg.workers > 1 else None
    try:
        seed_path = wd / "it000-seed.spill"
        if not done("seed", seed_path):
            write_spill(to_records(init_state(s), ORIENT_EXEMPLAR), str(seed_path))
            mark("seed", seed_path)

        prev = seed_path
        for it in range(1, iterations + 1):
            node_path = wd / f"it{it:03d}-node.spill"
            marker = f"{it}:rho-c-tau"
            if not done(marker, node_path):
                spec = job1_rho_c_tau(it, params, str(prev), str(node_path))
                _, report = execute(spec, workers=cfg.workers, pool=pool)
                if timings is not None:
                    timings.append((it, "rho-c-tau", report.wall_ms))
                mark(marker, node_path)

            ex_path = wd / f"it{it:03d}-exemplar.spill"
            marker = f"{it}:alpha-phi"
            if not done(marker, ex_path):
                spec = job2_alpha_phi(it, params, str(node_path), str(ex_path))
                _, report = execute(spec, workers=cfg.workers, pool=pool)
                if timings is not None:
                    timings.append((it, "alpha-phi", report.wall_ms))
                mark(marker, ex_path)
            prev = ex_path

        spec = job3_extract(params, str(prev))
        records, report = execute(spec, workers=cfg.workers, pool=pool)
        if timings is not None:
            timings.append((iterations, "extract", report.wall_ms))

        state = from_records(read_spill(str(prev)), iteration=iterations)
        table = _decode_assignments(records, s.levels, s.n)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        if tmp is not None:
            shutil.rmtree(tmp, ignore_errors=True)
    return state, table
