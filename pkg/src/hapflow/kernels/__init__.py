"""Message-update kernels with a compiled fast path and a numpy fallback.

The active path is chosen once at import time from the HAPFLOW_KERNELS
environment variable: "numba" (default when importable) or "numpy". Both
paths are written against the same pinned evaluation orders, so results are
bit-identical; the flag only trades compilation time against loop speed.

Each update takes one row or column plus the scalars it depends on:

* responsibility_row: rho_ij <- s_ij + min(tau_i, -max over k != j of
  (alpha_ik + s_ik)), the self entry j = i included under the same formula.
* availability_column: alpha_ij <- min(0, c_j + phi_j + rho_jj + sum over
  k outside {i, j} of max(0, rho_kj)) off the diagonal, and the uncapped
  c_j + phi_j + sum over k != j of max(0, rho_kj) on it.
* tau_next: support a point sends its level-(l+1) copy, from the level-l
  rho column and cluster preference.
* phi_prev: support a point receives from level l+1, the max of
  alpha + s over that row.
* cluster_preference: max of alpha + rho over a row.
* similarity_level_update: adds kappa times the row max of alpha + rho
  (self excluded) to every entry of the row, clamped to <= 0.
* extract_exemplar: argmax of alpha + rho over a row, ties to the lowest
  index.

Sums over k run left-to-right ascending, with excluded terms removed by
exact subtraction from the full total; that full total is also what the
parallel backend aggregates mapper-side, which is why both backends agree
bitwise.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import DegenerateSize, IndexOutOfRange, InvalidConfig, ShapeMismatch

_FLAG = os.environ.get("HAPFLOW_KERNELS", "").strip().lower()
if _FLAG not in ("", "numba", "numpy"):
    raise InvalidConfig(
        f"HAPFLOW_KERNELS must be 'numba' or 'numpy', got {_FLAG!r}"
    )

if _FLAG == "numpy":
    from . import _numpy as _impl

    _ACTIVE = "numpy"
else:
    try:
        from . import _numba as _impl

        _ACTIVE = "numba"
    except ImportError:
        if _FLAG == "numba":
            raise
        from . import _numpy as _impl

        _ACTIVE = "numpy"


def active_path() -> str:
    """Name of the kernel implementation selected at import time."""
    return _ACTIVE


def _vec(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def _mat(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeMismatch(f"{name} must be square 2-D, got shape {arr.shape}")
    return arr


def _same_length(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"{what}: lengths {a.shape[0]} and {b.shape[0]} differ")


def responsibility_row(s_row, alpha_row, tau_i: float) -> np.ndarray:
    s_row = _vec(s_row, "s_row")
    alpha_row = _vec(alpha_row, "alpha_row")
    _same_length(s_row, alpha_row, "responsibility_row")
    if s_row.shape[0] < 2:
        raise DegenerateSize(
            "responsibility_row needs N >= 2: the max over k != j is empty"
        )
    return _impl.resp_row(s_row, alpha_row, float(tau_i))


def availability_column(rho_col, j: int, c_j: float, phi_j: float) -> np.ndarray:
    rho_col = _vec(rho_col, "rho_col")
    if not 0 <= j < rho_col.shape[0]:
        raise IndexOutOfRange(f"column index {j} outside [0, {rho_col.shape[0]})")
    return _impl.avail_col(rho_col, j, float(c_j), float(phi_j))


def tau_next(rho_col_below, j: int, c_j_below: float) -> float:
    rho_col_below = _vec(rho_col_below, "rho_col_below")
    if not 0 <= j < rho_col_below.shape[0]:
        raise IndexOutOfRange(
            f"column index {j} outside [0, {rho_col_below.shape[0]})"
        )
    return float(_impl.tau_scalar(rho_col_below, j, float(c_j_below)))


def tau_from_parts(c_j_below: float, rho_diag_below: float, pos_total_below: float) -> float:
    """tau from the two shuffled column aggregates plus c.

    Mirrors tau_next exactly: (c + diag) + (total - max(0, diag)).
    """
    d = float(rho_diag_below)
    pd = d if d > 0.0 else 0.0
    return float((float(c_j_below) + d) + (float(pos_total_below) - pd))


def positive_total(col) -> float:
    """Left-to-right sum of max(0, x_k) over all k of a column."""
    return float(_impl.pos_total(_vec(col, "col")))


def phi_prev(alpha_row_above, s_row_above) -> float:
    alpha_row_above = _vec(alpha_row_above, "alpha_row_above")
    s_row_above = _vec(s_row_above, "s_row_above")
    _same_length(alpha_row_above, s_row_above, "phi_prev")
    if alpha_row_above.shape[0] < 1:
        raise DegenerateSize("phi_prev needs at least one entry")
    return float(_impl.phi_scalar(alpha_row_above, s_row_above))


def cluster_preference(alpha_row, rho_row) -> float:
    alpha_row = _vec(alpha_row, "alpha_row")
    rho_row = _vec(rho_row, "rho_row")
    _same_length(alpha_row, rho_row, "cluster_preference")
    if alpha_row.shape[0] < 1:
        raise DegenerateSize("cluster_preference needs at least one entry")
    return float(_impl.cpref_scalar(alpha_row, rho_row))


def similarity_level_update(s_row, i: int, alpha_row, rho_row, kappa: float) -> np.ndarray:
    s_row = _vec(s_row, "s_row")
    alpha_row = _vec(alpha_row, "alpha_row")
    rho_row = _vec(rho_row, "rho_row")
    _same_length(s_row, alpha_row, "similarity_level_update")
    _same_length(s_row, rho_row, "similarity_level_update")
    if not 0 <= i < s_row.shape[0]:
        raise IndexOutOfRange(f"row index {i} outside [0, {s_row.shape[0]})")
    if not 0.0 <= kappa <= 1.0:
        raise InvalidConfig(f"kappa must lie in [0, 1], got {kappa}")
    summed = alpha_row + rho_row
    return _impl.shift_clamp(s_row, i, summed, float(kappa))


def shift_and_clamp(s_row, i: int, summed_row, kappa: float) -> np.ndarray:
    """similarity_level_update for a pre-summed alpha + rho row."""
    s_row = _vec(s_row, "s_row")
    summed_row = _vec(summed_row, "summed_row")
    _same_length(s_row, summed_row, "shift_and_clamp")
    if not 0 <= i < s_row.shape[0]:
        raise IndexOutOfRange(f"row index {i} outside [0, {s_row.shape[0]})")
    return _impl.shift_clamp(s_row, i, summed_row, float(kappa))


def extract_exemplar(alpha_row, rho_row) -> int:
    alpha_row = _vec(alpha_row, "alpha_row")
    rho_row = _vec(rho_row, "rho_row")
    _same_length(alpha_row, rho_row, "extract_exemplar")
    if alpha_row.shape[0] < 1:
        raise DegenerateSize("extract_exemplar needs at least one entry")
    return int(_impl.extract_scalar(alpha_row, rho_row))


def damp(old, new, damping: float) -> np.ndarray:
    old = _vec(old, "old")
    new = _vec(new, "new")
    _same_length(old, new, "damp")
    return _impl.damp_vec(old, new, float(damping))


# Matrix-granularity entry points used by the engines. Each one is the
# row/column kernel applied across a whole level, sharing its arithmetic.


def responsibility_matrix(s_mat, alpha_mat, tau_vec) -> np.ndarray:
    s_mat = _mat(s_mat, "s_mat")
    alpha_mat = _mat(alpha_mat, "alpha_mat")
    tau_vec = _vec(tau_vec, "tau_vec")
    if s_mat.shape[0] < 2:
        raise DegenerateSize("responsibility_matrix needs N >= 2")
    return _impl.resp_matrix(s_mat, alpha_mat, tau_vec)


def availability_matrix(rho_mat, c_vec, phi_vec) -> np.ndarray:
    return _impl.avail_matrix(
        _mat(rho_mat, "rho_mat"), _vec(c_vec, "c_vec"), _vec(phi_vec, "phi_vec")
    )


def tau_vector(rho_mat_below, c_vec_below) -> np.ndarray:
    return _impl.tau_vec_all(
        _mat(rho_mat_below, "rho_mat_below"), _vec(c_vec_below, "c_vec_below")
    )


def phi_vector(alpha_mat_above, s_mat_above) -> np.ndarray:
    return _impl.phi_vec_all(
        _mat(alpha_mat_above, "alpha_mat_above"), _mat(s_mat_above, "s_mat_above")
    )


def cluster_preference_vector(alpha_mat, rho_mat) -> np.ndarray:
    return _impl.cpref_vec_all(_mat(alpha_mat, "alpha_mat"), _mat(rho_mat, "rho_mat"))


def extract_vector(alpha_mat, rho_mat) -> np.ndarray:
    return _impl.extract_vec_all(_mat(alpha_mat, "alpha_mat"), _mat(rho_mat, "rho_mat"))


def similarity_matrix_update(s_mat, alpha_mat, rho_mat, kappa: float) -> np.ndarray:
    return _impl.eq7_matrix(
        _mat(s_mat, "s_mat"),
        _mat(alpha_mat, "alpha_mat"),
        _mat(rho_mat, "rho_mat"),
        float(kappa),
    )


def damp_matrix(old, new, damping: float) -> np.ndarray:
    return _impl.damp_mat(_mat(old, "old"), _mat(new, "new"), float(damping))
