"""Command-line entry point.

Four commands cover the experiment loop: `cluster` runs the engines on a
point file or a raw similarity matrix, `segment-image` clusters a pixmap's
pixels and recolors each level by its exemplars, `bench-scaling` times the
parallel engine across worker counts, and `purity` scores an assignment
file against labelled points. Every run writes a `run-manifest.json`
capturing the resolved flags; `rerun` replays a manifest and reproduces
the outputs.

Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or input
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import (
    ENGINE_MAPREDUCE,
    ENGINE_SEQUENTIAL,
    SCHEDULE_GAUSS_SEIDEL,
    SCHEDULE_JACOBI,
    RunConfig,
)
from .errors import (
    DimensionMismatch,
    HapflowError,
    InvalidConfig,
    InvalidRange,
    LengthMismatch,
    ParseError,
    PositiveSimilarity,
)
from .metrics import format_level_stats, purity_report, scaling_report
from .mr_jobs import drive
from .engine_sequential import run_sequential
from .similarity import (
    METRIC_NEG_EUCLIDEAN,
    METRIC_NEG_SQ_EUCLIDEAN,
    METRICS,
    PreferenceStrategy,
    apply_preferences,
    load_points_csv,
    load_ppm,
    load_similarity_matrix,
    similarity_from_image,
    similarity_from_points,
    write_ppm,
)
from .tensors import AssignmentTable

_USAGE_ERRORS = (
    InvalidConfig,
    InvalidRange,
    ParseError,
    PositiveSimilarity,
    DimensionMismatch,
    LengthMismatch,
    FileNotFoundError,
)

MANIFEST_NAME = "run-manifest.json"


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--levels", type=int, default=None,
                   help="hierarchy depth L (default 1; matrix input: from file)")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--lambda", dest="damping", type=float, default=0.5,
                   help="damping factor in (0, 1)")
    p.add_argument("--kappa", type=float, default=None,
                   help="enable the similarity level update with this strength")
    p.add_argument("--preference", default=None,
                   help="random:lo:hi | constant:v | median "
                        "(default random:-1e6:0; matrix input: keep diagonal)")
    p.add_argument("--metric", choices=METRICS, default=None,
                   help="default: neg-sq-euclidean for points, "
                        "neg-euclidean for images")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=(ENGINE_SEQUENTIAL, ENGINE_MAPREDUCE),
                   default=ENGINE_SEQUENTIAL)
    p.add_argument("--schedule",
                   choices=(SCHEDULE_GAUSS_SEIDEL, SCHEDULE_JACOBI),
                   default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="hapflow-out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hapflow",
        description="hierarchical exemplar clustering by message passing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="cluster a point file or similarity matrix")
    p.add_argument("input", help="points CSV or raw similarity matrix file")
    p.add_argument("--input-format", choices=("auto", "points", "matrix"),
                   default="auto")
    _add_run_flags(p)

    p = sub.add_parser("segment-image", help="cluster pixels and recolor per level")
    p.add_argument("input", help="PPM image (P3 or P6)")
    _add_run_flags(p)

    p = sub.add_parser("bench-scaling",
                       help="time the parallel engine across worker counts")
    p.add_argument("input", help="points CSV")
    p.add_argument("--workers-list", default="1,2,4",
                   help="comma-separated worker counts")
    _add_run_flags(p)

    p = sub.add_parser("purity", help="score an assignment file against labels")
    p.add_argument("assignments", help="assignments.tsv from a cluster run")
    p.add_argument("points", help="labelled points CSV")
    p.add_argument("--out", default=None,
                   help="also write purity.txt into this directory")

    p = sub.add_parser("rerun", help="replay a run-manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output directory")

    return parser


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file does not exist: {path}")
    return p


def _sniff_format(path: Path) -> str:
    if path.suffix.lower() == ".csv":
        return "points"
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) == 2 and all(f.isdigit() for f in fields):
                return "matrix"
            return "points"
    raise ParseError(f"{path}: empty input file")


def _build_config(args, levels: int) -> RunConfig:
    return RunConfig(
        levels=levels,
        iterations=args.iterations,
        damping=args.damping,
        kappa=args.kappa,
        seed=args.seed,
        engine=args.engine,
        schedule=args.schedule,
        workers=args.workers,
    )


def _run_engine(s, cfg: RunConfig, timings=None):
    if cfg.engine == ENGINE_MAPREDUCE:
        return drive(s, cfg, timings=timings)
    return run_sequential(s, cfg, timings=timings)


def _write_assignments(table: AssignmentTable, path: Path) -> None:
    lines = []
    for i in range(table.n):
        for lv in range(1, table.levels + 1):
            lines.append(f"{i}\t{lv}\t{int(table.level(lv)[i])}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _read_assignments(path: Path) -> AssignmentTable:
    cells: dict[tuple[int, int], int] = {}
    n = 0
    levels = 0
    for lineno, line in enumerate(path.read_text(encoding="ascii").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"{path}:{lineno}: expected point TAB level TAB exemplar"
            )
        try:
            i, lv, e = int(fields[0]), int(fields[1]), int(fields[2])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        cells[(lv, i)] = e
        n = max(n, i + 1)
        levels = max(levels, lv)
    if not cells:
        raise ParseError(f"{path}: no assignment rows")
    arr = np.zeros((levels, n), dtype=np.int64)
    for lv in range(1, levels + 1):
        for i in range(n):
            if (lv, i) not in cells:
                raise ParseError(
                    f"{path}: missing assignment for point {i} level {lv}"
                )
            arr[lv - 1, i] = cells[(lv, i)]
    return AssignmentTable(arr)


def _purity_text(report) -> str:
    return "\n".join(report.machine_lines()) + "\n\n" + report.text() + "\n"


def _write_manifest(out: Path, command: str, input_paths: dict, flags: dict) -> None:
    payload = {
        "command": command,
        "inputs": {k: str(Path(v).resolve()) for k, v in input_paths.items()},
        "flags": flags,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(payload, indent=2) + "\n")


def _run_flags_dict(args) -> dict:
    return {
        "levels": args.levels,
        "iterations": args.iterations,
        "damping": args.damping,
        "kappa": args.kappa,
        "preference": args.preference,
        "metric": args.metric,
        "seed": args.seed,
        "engine": args.engine,
        "schedule": args.schedule,
        "workers": args.workers,
    }


def cmd_cluster(args) -> int:
    path = _require_file(args.input)
    fmt = args.input_format
    if fmt == "auto":
        fmt = _sniff_format(path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    labels = None
    if fmt == "points":
        ps = load_points_csv(str(path))
        labels = ps.labels
        levels = args.levels if args.levels is not None else 1
        metric = args.metric or METRIC_NEG_SQ_EUCLIDEAN
        pref = PreferenceStrategy.parse(args.preference or "random:-1e6:0")
        s = similarity_from_points(ps, metric, levels, pref, args.seed)
    else:
        s = load_similarity_matrix(str(path))
        if args.levels is not None and args.levels != s.levels:
            raise InvalidConfig(
                f"--levels {args.levels} but the matrix file has {s.levels} levels"
            )
        levels = s.levels
        if args.preference is not None:
            s = apply_preferences(
                s, PreferenceStrategy.parse(args.preference), args.seed
            )

    cfg = _build_config(args, levels)
    _, table = _run_engine(s, cfg)

    _write_assignments(table, out / "assignments.tsv")
    (out / "stats.txt").write_text(format_level_stats(table) + "\n")
    if labels is not None:
        (out / "purity.txt").write_text(_purity_text(purity_report(table, labels)))
    flags = _run_flags_dict(args)
    flags["input_format"] = args.input_format
    _write_manifest(out, "cluster", {"input": path}, flags)
    print(f"wrote {out / 'assignments.tsv'}")
    return 0


def cmd_segment_image(args) -> int:
    path = _require_file(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = load_ppm(str(path))
    levels = args.levels if args.levels is not None else 1
    metric = args.metric or METRIC_NEG_EUCLIDEAN
    pref = PreferenceStrategy.parse(args.preference or "random:-1e6:0")
    s = similarity_from_image(grid, metric, levels, pref, args.seed)

    cfg = _build_config(args, levels)
    _, table = _run_engine(s, cfg)

    for lv in range(1, levels + 1):
        write_ppm(grid.recolored(table.level(lv)), str(out / f"level-{lv}.ppm"))
    _write_assignments(table, out / "assignments.tsv")
    (out / "stats.txt").write_text(format_level_stats(table) + "\n")
    _write_manifest(out, "segment-image", {"input": path}, _run_flags_dict(args))
    print(f"wrote {levels} recolored image(s) under {out}")
    return 0


def cmd_bench_scaling(args) -> int:
    path = _require_file(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        worker_counts = [int(w) for w in args.workers_list.split(",") if w.strip()]
    except ValueError as exc:
        raise InvalidConfig(f"bad --workers-list {args.workers_list!r}") from exc
    if not worker_counts:
        raise InvalidConfig("--workers-list must name at least one worker count")

    ps = load_points_csv(str(path))
    levels = args.levels if args.levels is not None else 1
    metric = args.metric or METRIC_NEG_SQ_EUCLIDEAN
    pref = PreferenceStrategy.parse(args.preference or "random:-1e6:0")
    s = similarity_from_points(ps, metric, levels, pref, args.seed)

    walls: list[tuple[int, float]] = []
    timing_rows: list[str] = []
    reference = None
    for w in worker_counts:
        cfg = _build_config(args, levels).with_updates(
            engine=ENGINE_MAPREDUCE, schedule=None, workers=w
        )
        timings: list = []
        _, table = drive(s, cfg, timings=timings)
        if reference is None:
            reference = table
            _write_assignments(table, out / "assignments.tsv")
        elif not np.array_equal(reference.exemplars, table.exemplars):
            raise HapflowError(
                f"assignments with {w} workers differ from the first run"
            )
        for it, job, ms in timings:
            timing_rows.append(f"{w}\t{it}\t{job}\t{ms!r}")
        walls.append((w, sum(ms for _, _, ms in timings)))

    if len(walls) >= 2:
        report_text = scaling_report(walls).text()
    else:
        w, t = walls[0]
        report_text = f"workers  wall_ms  speedup\n{w}  {t:.1f}  1.00"
    (out / "scaling.txt").write_text(report_text + "\n")
    (out / "timings.tsv").write_text("\n".join(timing_rows) + "\n")
    flags = _run_flags_dict(args)
    flags["workers_list"] = args.workers_list
    _write_manifest(out, "bench-scaling", {"input": path}, flags)
    print(report_text)
    return 0


def cmd_purity(args) -> int:
    apath = _require_file(args.assignments)
    ppath = _require_file(args.points)
    table = _read_assignments(apath)
    ps = load_points_csv(str(ppath))
    if ps.labels is None:
        raise InvalidConfig(f"points file {ppath} has no label column")
    report = purity_report(table, ps.labels)
    text = _purity_text(report)
    print(text, end="")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "purity.txt").write_text(text)
        _write_manifest(
            out, "purity", {"assignments": apath, "points": ppath}, {}
        )
    return 0


def cmd_rerun(args) -> int:
    mpath = _require_file(args.manifest)
    try:
        payload = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{mpath}: {exc}") from exc
    command = payload.get("command")
    inputs = payload.get("inputs", {})
    flags = payload.get("flags", {})
    out = args.out if args.out is not None else str(mpath.parent)

    ns = argparse.Namespace(**flags)
    ns.out = out
    if command == "cluster":
        ns.input = inputs["input"]
        ns.input_format = flags.get("input_format", "auto")
        return cmd_cluster(ns)
    if command == "segment-image":
        ns.input = inputs["input"]
        return cmd_segment_image(ns)
    if command == "bench-scaling":
        ns.input = inputs["input"]
        ns.workers_list = flags.get("workers_list", "1")
        return cmd_bench_scaling(ns)
    if command == "purity":
        ns.assignments = inputs["assignments"]
        ns.points = inputs["points"]
        ns.out = out
        return cmd_purity(ns)
    raise ParseError(f"{mpath}: unknown command {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "cluster": cmd_cluster,
        "segment-image": cmd_segment_image,
        "bench-scaling": cmd_bench_scaling,
        "purity": cmd_purity,
        "rerun": cmd_rerun,
    }
    try:
        return handlers[args.command](args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HapflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"unexpected error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
