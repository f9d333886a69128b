"""Update-rule kernels: frozen hand oracles plus algebraic properties."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hapflow.errors import DegenerateSize, IndexOutOfRange, InvalidConfig
from hapflow.kernels import (
    availability_column,
    cluster_preference,
    damp,
    extract_exemplar,
    phi_prev,
    responsibility_row,
    similarity_level_update,
    tau_from_parts,
    tau_next,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
rows = st.lists(finite, min_size=2, max_size=12)


def paired_rows(draw, n_min=2):
    n = draw(st.integers(n_min, 12))
    vec = st.lists(finite, min_size=n, max_size=n)
    return draw(vec), draw(vec)


# --- responsibility ---------------------------------------------------------


def test_responsibility_infinite_ceiling():
    out = responsibility_row([0, -1, -2], [0, 0, 0], math.inf)
    np.testing.assert_array_equal(out, [1, -1, -2])


def test_responsibility_ceiling_dominates():
    out = responsibility_row([0, -1], [0, 0], -5.0)
    np.testing.assert_array_equal(out, [-5, -6])


def test_responsibility_rejects_single_point():
    with pytest.raises(DegenerateSize):
        responsibility_row([0.0], [0.0], math.inf)


def _flat_ap_responsibility(s_row, alpha_row):
    # independent oracle: plain argmax-excluded form, one entry at a time
    n = len(s_row)
    out = []
    for j in range(n):
        best = max(alpha_row[k] + s_row[k] for k in range(n) if k != j)
        out.append(s_row[j] + min(math.inf, -best))
    return out


@given(st.data())
@settings(max_examples=200, deadline=None)
def test_responsibility_matches_flat_oracle(data):
    s_row, alpha_row = paired_rows(data.draw)
    out = responsibility_row(s_row, alpha_row, math.inf)
    np.testing.assert_array_equal(out, _flat_ap_responsibility(s_row, alpha_row))


@given(st.data(), finite)
@settings(max_examples=200, deadline=None)
def test_responsibility_ceiling_bounds_output(data, tau):
    s_row, alpha_row = paired_rows(data.draw)
    out = responsibility_row(s_row, alpha_row, tau)
    assert np.all(out <= np.asarray(s_row) + tau)


# --- availability -----------------------------------------------------------


def test_availability_positive_evidence():
    out = availability_column([0.5, -0.2, 0.3], 1, 0.0, 0.0)
    np.testing.assert_allclose(out, [0.0, 0.8, 0.0], rtol=0, atol=0)


def test_availability_all_nonpositive_column():
    col = [-0.4, -0.1, -0.9]
    out = availability_column(col, 1, 0.0, 0.0)
    assert out[1] == 0.0
    assert out[0] == col[1] and out[2] == col[1]


def test_availability_shifted_by_cluster_preference():
    out = availability_column([0.5, -0.2, 0.3], 1, -10.0, 0.0)
    np.testing.assert_allclose(out, [-9.9, -9.2, -9.7])
    assert np.all(out[[0, 2]] < 0)


def test_availability_index_checked():
    with pytest.raises(IndexOutOfRange):
        availability_column([0.0, 0.0], 2, 0.0, 0.0)


@given(st.data(), finite, finite)
@settings(max_examples=200, deadline=None)
def test_availability_off_diagonal_never_positive(data, c_j, phi_j):
    col, _ = paired_rows(data.draw)
    j = data.draw(st.integers(0, len(col) - 1))
    out = availability_column(col, j, c_j, phi_j)
    mask = np.ones(len(col), dtype=bool)
    mask[j] = False
    assert np.all(out[mask] <= 0.0)


# --- inter-level scalars ----------------------------------------------------


def test_tau_accumulates_column_evidence():
    assert tau_next([0.2, -0.3, 0.4], 2, -1.0) == pytest.approx(-0.4)
    assert tau_next([0.0, 0.0], 0, 0.0) == 0.0
    assert tau_next([1.0, 1.0], 0, 0.0) == 2.0


@given(st.data(), finite)
@settings(max_examples=200, deadline=None)
def test_tau_from_shuffled_parts_matches_direct(data, c_j):
    col, _ = paired_rows(data.draw)
    j = data.draw(st.integers(0, len(col) - 1))
    total = float(np.sum(np.maximum(0.0, np.asarray(col))))
    # the two-scalar form must agree with the direct column evaluation
    direct = tau_next(col, j, c_j)
    from hapflow.kernels import positive_total

    assert tau_from_parts(c_j, col[j], positive_total(col)) == direct


def test_phi_takes_row_maximum():
    assert phi_prev([0.0, -0.5], [-1.0, 0.0]) == -0.5
    assert phi_prev([0.0, 0.0], [0.0, -3.0]) == 0.0
    assert phi_prev([2.5], [-1.25]) == 1.25


def test_cluster_preference_row_maximum():
    assert cluster_preference([0.0, 0.0], [-1.0, 2.0]) == 2.0
    assert cluster_preference([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert cluster_preference([-3.0, -1.0], [1.0, -1.0]) == -2.0


# --- similarity level update ------------------------------------------------


def test_level_update_disabled_at_zero_strength():
    s_row = np.array([-1.0, -2.0, 0.0])
    out = similarity_level_update(s_row, 0, [1.0, 2.0, 3.0], [0.5, 0.5, 0.5], 0.0)
    np.testing.assert_array_equal(out, s_row)


def test_level_update_applies_row_shift():
    out = similarity_level_update([0.0, -2.0], 0, [0.0, 0.0], [-1.0, -3.0], 1.0)
    np.testing.assert_array_equal(out, [-3.0, -5.0])


def test_level_update_clamps_positive_shift():
    out = similarity_level_update([0.0, -1.0], 0, [5.0, 5.0], [0.0, 0.0], 1.0)
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_level_update_strength_validated():
    with pytest.raises(InvalidConfig):
        similarity_level_update([0.0, 0.0], 0, [0.0, 0.0], [0.0, 0.0], 1.5)


@given(st.data(), st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
@settings(max_examples=150, deadline=None)
def test_level_update_output_nonpositive(data, kappa):
    a, r = paired_rows(data.draw)
    s_row = [-abs(x) for x in a]
    i = data.draw(st.integers(0, len(a) - 1))
    out = similarity_level_update(s_row, i, a, r, kappa)
    assert np.all(out <= 0.0)


# --- assignment extraction --------------------------------------------------


def test_extract_takes_argmax():
    assert extract_exemplar([0.0, 1.0], [0.0, 0.0]) == 1


def test_extract_breaks_ties_low():
    assert extract_exemplar([0.3, 0.3], [0.0, 0.0]) == 0


def test_extract_single_point():
    assert extract_exemplar([0.0], [0.0]) == 0


@given(st.data(), st.integers(-50, 50))
@settings(max_examples=200, deadline=None)
def test_extract_invariant_under_constant_shift(data, shift):
    n = data.draw(st.integers(1, 10))
    ints = st.lists(st.integers(-100, 100), min_size=n, max_size=n)
    a = [float(x) for x in data.draw(ints)]
    r = [float(x) for x in data.draw(ints)]
    shifted = [x + float(shift) for x in a]
    assert extract_exemplar(a, r) == extract_exemplar(shifted, r)


# --- damping ----------------------------------------------------------------


def test_damp_convex_mix():
    np.testing.assert_array_equal(damp([2.0], [0.0], 0.5), [1.0])


def test_damp_fixed_point():
    v = np.array([1.5, -2.5, 0.0])
    np.testing.assert_array_equal(damp(v, v, 0.73), v)


def test_damp_zero_coefficient_is_identity_on_new():
    np.testing.assert_array_equal(damp([9.0, -9.0], [1.0, 2.0], 0.0), [1.0, 2.0])


@given(st.data(), st.floats(min_value=0.01, max_value=0.99))
@settings(max_examples=200, deadline=None)
def test_damp_contracts_toward_new(data, lam):
    old, new = paired_rows(data.draw)
    out = damp(old, new, lam)
    for o, n, d in zip(old, new, out):
        assert math.isclose(abs(d - n), lam * abs(o - n), rel_tol=1e-9, abs_tol=1e-6)


# --- path agreement ---------------------------------------------------------

_numba = pytest.importorskip("hapflow.kernels._numba")
from hapflow.kernels import _numpy as _plain  # noqa: E402


@given(st.data())
@settings(max_examples=100, deadline=None)
def test_compiled_and_plain_paths_agree_bitwise(data):
    a, r = paired_rows(data.draw)
    s_row = np.array([-abs(x) for x in a])
    a = np.asarray(a)
    r = np.asarray(r)
    j = data.draw(st.integers(0, len(a) - 1))
    tau = data.draw(st.one_of(st.just(math.inf), finite))
    c_j = data.draw(finite)
    phi_j = data.draw(finite)
    lam = data.draw(st.floats(min_value=0.01, max_value=0.99))

    np.testing.assert_array_equal(
        _numba.resp_row(s_row, a, tau), _plain.resp_row(s_row, a, tau)
    )
    np.testing.assert_array_equal(
        _numba.avail_col(r, j, c_j, phi_j), _plain.avail_col(r, j, c_j, phi_j)
    )
    assert _numba.tau_scalar(r, j, c_j) == _plain.tau_scalar(r, j, c_j)
    assert _numba.phi_scalar(a, s_row) == _plain.phi_scalar(a, s_row)
    assert _numba.cpref_scalar(a, r) == _plain.cpref_scalar(a, r)
    assert _numba.extract_scalar(a, r) == _plain.extract_scalar(a, r)
    np.testing.assert_array_equal(
        _numba.damp_vec(a, r, lam), _plain.damp_vec(a, r, lam)
    )
