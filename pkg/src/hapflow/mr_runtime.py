"""Embedded map / shuffle / reduce runtime.

Execution is defined as the deterministic composition

    reduce  o  sort-groups  o  group-by-key  o  map

over keyed records, independent of worker count and scheduling:

* intermediate keys are (index, level) pairs, totally ordered by
  (level, index);
* intermediate values are (tag, source-index, payload) triples; each
  reducer's value group is delivered sorted by the stable total order on
  (tag, source-index), ties keeping arrival order (which equals input
  record order, so it does not depend on the block partitioning);
* mapper inputs are partitioned into contiguous blocks, reducer keys are
  partitioned by a fixed hash of (level, index);
* sink contents are re-ordered canonically, so any workers count in
  {1, .., 16} produces bitwise identical output.

With workers == 1 everything runs in-process; with more, map and reduce
tasks run on a forked process pool and emissions travel through pickle
files in a shuffle directory, so the parent never touches per-element
data. Spill files (see tensors) are the only hand-off between chained
jobs.
"""

from __future__ import annotations

import json
import multiprocessing
import pickle
import shutil
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    InvalidConfig,
    MapperFailure,
    ReducerFailure,
    SpillIOFailure,
)
from .tensors import (
    KeyedRecord,
    format_record_line,
    coalesce_scalar_records,
    parse_record_line,
    read_spill,
    sort_records,
    write_spill,
)

IKey = tuple[int, int]  # (index, level)

MAX_WORKERS = 16


@dataclass(frozen=True)
class JobSpec:
    """One map/reduce job.

    mapper: KeyedRecord -> iterable of ((index, level), (tag, src, payload)).
    reducer: ((index, level), sorted value group) -> iterable of KeyedRecord.
    input: a spill file path or an in-memory record sequence.
    output: a spill file path, or None to collect records in memory.
    Both callables must be picklable (module-level functions or dataclass
    instances) so they can cross the process-pool boundary.
    """

    name: str
    mapper: Callable
    reducer: Callable
    input: "str | Sequence[KeyedRecord] | None" = None
    output: "str | None" = None


@dataclass
class JobReport:
    name: str
    map_tasks: int
    reduce_keys: int
    records_in: int
    records_out: int
    wall_ms: float
    resumed: bool = False

    def __str__(self) -> str:
        status = " (resumed from spill)" if self.resumed else ""
        return (
            f"job: {self.name}{status}\n"
            f"  map tasks:   {self.map_tasks}\n"
            f"  reduce keys: {self.reduce_keys}\n"
            f"  records in:  {self.records_in}\n"
            f"  records out: {self.records_out}\n"
            f"  wall ms:     {self.wall_ms:.1f}"
        )


@dataclass
class ChainReport:
    jobs: list[JobReport] = field(default_factory=list)
    total_ms: float = 0.0

    def __str__(self) -> str:
        body = "\n".join(str(j) for j in self.jobs)
        return f"{body}\nchain total ms: {self.total_ms:.1f}"


def _ikey_order(ikey: IKey) -> tuple[int, int]:
    index, level = ikey
    return (level, index)


def _partition_of(ikey: IKey, nparts: int) -> int:
    index, level = ikey
    return ((level * 1_000_003 + index * 7_919) & 0x7FFFFFFF) % nparts


def _group_sort_key(value) -> tuple:
    # (tag, source-index); payload never participates
    return (value[0], value[1])


def _memory_sort_key(rec: KeyedRecord) -> tuple:
    k = rec.key
    return (k.level, str(k.tag), k.index, k.orientation)


def _map_records(
    job_name: str, mapper: Callable, records: Sequence[KeyedRecord]
) -> list[tuple[IKey, tuple]]:
    out: list[tuple[IKey, tuple]] = []
    for rec in records:
        try:
            emitted = list(mapper(rec))
        except Exception as exc:
            raise MapperFailure(
                f"{job_name}: mapper failed on record {rec.key}: {exc!r}"
            ) from exc
        out.extend(emitted)
    return out


def _reduce_groups(
    job_name: str,
    reducer: Callable,
    emissions: Iterable[tuple[IKey, tuple]],
) -> tuple[list[KeyedRecord], int]:
    groups: dict[IKey, list] = {}
    for ikey, ival in emissions:
        groups.setdefault(ikey, []).append(ival)
    out: list[KeyedRecord] = []
    for ikey in sorted(groups, key=_ikey_order):
        values = sorted(groups[ikey], key=_group_sort_key)
        try:
            out.extend(reducer(ikey, values))
        except Exception as exc:
            raise ReducerFailure(
                f"{job_name}: reducer failed on key {ikey}: {exc!r}"
            ) from exc
    return out, len(groups)


def _load_input(job: JobSpec) -> list[KeyedRecord]:
    if job.input is None:
        raise InvalidConfig(f"job {job.name} has no input")
    if isinstance(job.input, (str, Path)):
        return read_spill(str(job.input))
    return list(job.input)


def _execute_inprocess(job: JobSpec) -> tuple[list[KeyedRecord] | None, JobReport]:
    t0 = time.perf_counter()
    records = _load_input(job)
    emissions = _map_records(job.name, job.mapper, records)
    reduced, nkeys = _reduce_groups(job.name, job.reducer, emissions)
    if job.output is not None:
        nout = write_spill(reduced, str(job.output))
        result = None
    else:
        reduced.sort(key=_memory_sort_key)
        nout = len(reduced)
        result = reduced
    wall = (time.perf_counter() - t0) * 1e3
    return result, JobReport(job.name, 1, nkeys, len(records), nout, wall)


# ---- pooled execution ----------------------------------------------------
# Worker entry points are module-level so they pickle by reference.


def _map_task(args):
    (job_name, task_idx, mapper, payload, payload_is_lines, nparts, shuffle_dir) = args
    if payload_is_lines:
        records = [
            parse_record_line(line, i + 1, f"<{job_name} input>")
            for i, line in enumerate(payload)
        ]
    else:
        records = payload
    emissions = _map_records(job_name, mapper, records)
    parts: list[list] = [[] for _ in range(nparts)]
    for ikey, ival in emissions:
        parts[_partition_of(ikey, nparts)].append((ikey, ival))
    for r, plist in enumerate(parts):
        path = Path(shuffle_dir) / f"m{task_idx:04d}-p{r:04d}.pkl"
        with open(path, "wb") as fh:
            pickle.dump(plist, fh, protocol=pickle.HIGHEST_PROTOCOL)
    return task_idx, len(records), len(emissions)


def _reduce_task(args):
    (job_name, part_idx, reducer, file_paths, sink_is_spill) = args
    emissions: list = []
    for p in file_paths:
        try:
            with open(p, "rb") as fh:
                emissions.extend(pickle.load(fh))
        except OSError as exc:
            raise SpillIOFailure(f"{job_name}: cannot read shuffle file {p}: {exc}")
    reduced, nkeys = _reduce_groups(job_name, reducer, emissions)
    if sink_is_spill:
        lines: list[tuple[tuple, str]] = []
        scalars: list[KeyedRecord] = []
        for rec in reduced:
            if isinstance(rec.value, np.ndarray):
                lines.append((rec.key.sort_key(), format_record_line(rec)))
            else:
                scalars.append(rec)
        return part_idx, nkeys, lines, scalars
    return part_idx, nkeys, None, reduced


def _blocks(n_items: int, n_blocks: int) -> list[tuple[int, int]]:
    """Contiguous block bounds covering range(n_items)."""
    n_blocks = max(1, min(n_blocks, n_items)) if n_items else 1
    base, extra = divmod(n_items, n_blocks)
    bounds = []
    start = 0
    for b in range(n_blocks):
        size = base + (1 if b < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _execute_pooled(
    job: JobSpec, workers: int, pool
) -> tuple[list[KeyedRecord] | None, JobReport]:
    t0 = time.perf_counter()
    if isinstance(job.input, (str, Path)):
        try:
            with open(job.input, "r", encoding="ascii") as fh:
                lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        except OSError as exc:
            raise SpillIOFailure(f"cannot read spill {job.input}: {exc}") from exc
        items: Sequence = lines
        is_lines = True
    elif job.input is None:
        raise InvalidConfig(f"job {job.name} has no input")
    else:
        items = list(job.input)
        is_lines = False

    shuffle_dir = tempfile.mkdtemp(prefix=f"shuffle-{job.name}-")
    try:
        bounds = _blocks(len(items), workers)
        map_args = [
            (job.name, t, job.mapper, items[a:b], is_lines, workers, shuffle_dir)
            for t, (a, b) in enumerate(bounds)
        ]
        map_results = pool.map(_map_task, map_args)
        records_in = sum(r[1] for r in map_results)

        task_ids = sorted(r[0] for r in map_results)
        sink_is_spill = job.output is not None
        reduce_args = []
        for part in range(workers):
            files = [
                str(Path(shuffle_dir) / f"m{t:04d}-p{part:04d}.pkl")
                for t in task_ids
            ]
            reduce_args.append((job.name, part, job.reducer, files, sink_is_spill))
        reduce_results = pool.map(_reduce_task, reduce_args)
    finally:
        shutil.rmtree(shuffle_dir, ignore_errors=True)

    nkeys = sum(r[1] for r in reduce_results)
    if job.output is not None:
        all_lines: list[tuple[tuple, str]] = []
        scalars: list[KeyedRecord] = []
        for _, _, lines_part, scalars_part in reduce_results:
            all_lines.extend(lines_part)
            scalars.extend(scalars_part)
        for rec in sort_records(coalesce_scalar_records(scalars)):
            all_lines.append((rec.key.sort_key(), format_record_line(rec)))
        all_lines.sort(key=lambda kv: kv[0])
        try:
            with open(job.output, "w", encoding="ascii") as fh:
                for _, line in all_lines:
                    fh.write(line)
                    fh.write("\n")
        except OSError as exc:
            raise SpillIOFailure(f"cannot write spill {job.output}: {exc}") from exc
        result: list[KeyedRecord] | None = None
        nout = len(all_lines)
    else:
        collected: list[KeyedRecord] = []
        for _, _, _, recs in reduce_results:
            collected.extend(recs)
        collected.sort(key=_memory_sort_key)
        result = collected
        nout = len(collected)
    wall = (time.perf_counter() - t0) * 1e3
    return result, JobReport(job.name, len(bounds), nkeys, records_in, nout, wall)


def worker_pool(workers: int):
    """Forked process pool sized for `workers`; caller must close it."""
    ctx = multiprocessing.get_context("fork")
    return ctx.Pool(processes=workers)


def execute(
    job: JobSpec, workers: int = 1, pool=None
) -> tuple[list[KeyedRecord] | None, JobReport]:
    """Run one job. Returns (records, report); records is None for spill sinks.

    Output is bitwise independent of `workers`. workers == 1 runs fully
    in-process (this is also the oracle path the pooled result is compared
    against in tests).
    """
    if not 1 <= workers <= MAX_WORKERS:
        raise InvalidConfig(f"workers must lie in [1, {MAX_WORKERS}], got {workers}")
    if workers == 1:
        return _execute_inprocess(job)
    own_pool = pool is None
    if own_pool:
        pool = worker_pool(workers)
    try:
        return _execute_pooled(job, workers, pool)
    finally:
        if own_pool:
            pool.close()
            pool.join()


def chain(
    jobs: Sequence[JobSpec],
    workers: int = 1,
    workdir: "str | None" = None,
) -> tuple[list[KeyedRecord] | None, ChainReport]:
    """Run jobs in order, persisting every boundary to a spill file.

    Each job's output feeds the next job's input. Boundaries default to
    files under `workdir` (a temporary directory when omitted). When
    `workdir` holds a manifest from an earlier interrupted run, completed
    jobs are skipped and execution resumes from the persisted spill, with
    final output identical to an uninterrupted run.
    """
    if not jobs:
        raise InvalidConfig("chain needs at least one job")
    t0 = time.perf_counter()
    tmp = None
    if workdir is None:
        tmp = tempfile.mkdtemp(prefix="chain-")
        workdir = tmp
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    manifest_path = wd / "chain-manifest.json"
    completed: dict[str, str] = {}
    if manifest_path.exists():
        try:
            completed = json.loads(manifest_path.read_text())
        except (OSError, json.JSONDecodeError):
            completed = {}

    wired: list[JobSpec] = []
    prev_out: "str | None" = None
    for i, job in enumerate(jobs):
        inp = job.input if i == 0 else prev_out
        out = job.output
        if out is None and i < len(jobs) - 1:
            out = str(wd / f"boundary-{i:02d}-{job.name}.spill")
        wired.append(replace(job, input=inp, output=out))
        prev_out = out

    report = ChainReport()
    result: list[KeyedRecord] | None = None
    pool = worker_pool(workers) if workers > 1 else None
    try:
        for i, job in enumerate(wired):
            marker = f"{i}:{job.name}"
            if (
                marker in completed
                and job.output is not None
                and Path(job.output).exists()
            ):
                report.jobs.append(JobReport(job.name, 0, 0, 0, 0, 0.0, resumed=True))
                continue
            result, jr = execute(job, workers=workers, pool=pool)
            report.jobs.append(jr)
            if job.output is not None:
                completed[marker] = str(job.output)
                manifest_path.write_text(json.dumps(completed, indent=2))
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        if tmp is not None:
            shutil.rmtree(tmp, ignore_errors=True)
    report.total_ms = (time.perf_counter() - t0) * 1e3
    return result, report
