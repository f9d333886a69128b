"""Hierarchical exemplar clustering by message passing.

Points exchange responsibility and availability messages until a set of
exemplars emerges at each of L levels, with support values tying adjacent
levels together. Two engines produce the result: a single-process engine
(`engine="sequential"`) and a map/shuffle/reduce pipeline
(`engine="mapreduce"`) whose output is bitwise identical to the
sequential engine's jacobi schedule at any worker count.

    >>> import numpy as np, hapflow
    >>> pts = hapflow.PointSet(np.array(
    ...     [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0], [9.1, 9.0]]))
    >>> s = hapflow.similarity_from_points(
    ...     pts, "neg-sq-euclidean", levels=1,
    ...     pref=hapflow.PreferenceStrategy.parse("constant:-200"))
    >>> state, table = hapflow.run(s, hapflow.RunConfig(iterations=30))
    >>> table.exemplar_counts()
    [2]
"""

from .config import (
    ENGINE_MAPREDUCE,
    ENGINE_SEQUENTIAL,
    SCHEDULE_GAUSS_SEIDEL,
    SCHEDULE_JACOBI,
    RunConfig,
)
from .engine_sequential import extract_assignments, replay_iterations, run_sequential
from .errors import HapflowError
from .metrics import (
    PurityReport,
    ScalingReport,
    format_level_stats,
    level_stats,
    purity,
    purity_report,
    scaling_report,
)
from .mr_jobs import drive
from .similarity import (
    PixelGrid,
    PointSet,
    PreferenceStrategy,
    apply_preferences,
    load_points_csv,
    load_ppm,
    load_similarity_matrix,
    pairwise_similarity,
    similarity_from_image,
    similarity_from_points,
    write_ppm,
)
from .tensors import (
    AssignmentTable,
    MessageState,
    SimilarityTensor,
    init_state,
    states_equal,
)

__version__ = "0.1.0"


def run(s, cfg: RunConfig, workdir=None, timings=None):
    """Run the configured engine; returns (MessageState, AssignmentTable)."""
    if cfg.engine == ENGINE_MAPREDUCE:
        return drive(s, cfg, workdir=workdir, timings=timings)
    return run_sequential(s, cfg, timings=timings)


__all__ = [
    "AssignmentTable",
    "ENGINE_MAPREDUCE",
    "ENGINE_SEQUENTIAL",
    "HapflowError",
    "MessageState",
    "PixelGrid",
    "PointSet",
    "PreferenceStrategy",
    "PurityReport",
    "RunConfig",
    "SCHEDULE_GAUSS_SEIDEL",
    "SCHEDULE_JACOBI",
    "ScalingReport",
    "SimilarityTensor",
    "apply_preferences",
    "drive",
    "extract_assignments",
    "format_level_stats",
    "init_state",
    "level_stats",
    "load_points_csv",
    "load_ppm",
    "load_similarity_matrix",
    "pairwise_similarity",
    "purity",
    "purity_report",
    "replay_iterations",
    "run",
    "run_sequential",
    "scaling_report",
    "similarity_from_image",
    "similarity_from_points",
    "states_equal",
    "write_ppm",
]
