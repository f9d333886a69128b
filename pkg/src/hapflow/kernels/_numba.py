"""Compiled message-update kernels.

All loops run in ascending index order and sums are strict left-to-right so
the numpy fallback (which uses sequential accumulate and first-occurrence
argmax) produces bit-identical results. No fastmath, no parallel sections.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def pos_total(col):
    # left-to-right sum of positive parts over all k
    total = 0.0
    for k in range(col.shape[0]):
        v = col[k]
        if v > 0.0:
            total += v
    return total


@njit(cache=True)
def resp_row(s_row, alpha_row, tau_i):
    n = s_row.shape[0]
    best = NEG_INF
    second = NEG_INF
    arg = 0
    for k in range(n):
        v = alpha_row[k] + s_row[k]
        if v > best:
            second = best
            best = v
            arg = k
        elif v > second:
            second = v
    out = np.empty(n, dtype=np.float64)
    for j in range(n):
        bound = -second if j == arg else -best
        t = tau_i if tau_i < bound else bound
        out[j] = s_row[j] + t
    return out


@njit(cache=True)
def avail_col(rho_col, j, c_j, phi_j):
    n = rho_col.shape[0]
    total = pos_total(rho_col)
    rj = rho_col[j]
    pj = rj if rj > 0.0 else 0.0
    sum_wo_j = total - pj
    base = c_j + phi_j
    head = base + rj
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        if i == j:
            out[i] = base + sum_wo_j
        else:
            ri = rho_col[i]
            pi = ri if ri > 0.0 else 0.0
            val = head + (sum_wo_j - pi)
            out[i] = val if val < 0.0 else 0.0
    return out


@njit(cache=True)
def tau_scalar(rho_col, j, c_j):
    total = pos_total(rho_col)
    rj = rho_col[j]
    pj = rj if rj > 0.0 else 0.0
    return (c_j + rj) + (total - pj)


@njit(cache=True)
def phi_scalar(alpha_row, s_row):
    best = NEG_INF
    for k in range(alpha_row.shape[0]):
        v = alpha_row[k] + s_row[k]
        if v > best:
            best = v
    return best


@njit(cache=True)
def cpref_scalar(alpha_row, rho_row):
    best = NEG_INF
    for k in range(alpha_row.shape[0]):
        v = alpha_row[k] + rho_row[k]
        if v > best:
            best = v
    return best


@njit(cache=True)
def extract_scalar(alpha_row, rho_row):
    best = NEG_INF
    arg = 0
    for k in range(alpha_row.shape[0]):
        v = alpha_row[k] + rho_row[k]
        if v > best:
            best = v
            arg = k
    return arg


@njit(cache=True)
def shift_clamp(s_row, i, summed_row, kappa):
    n = s_row.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 1:
        # no neighbors to take the max over: the shift is absent
        v = s_row[0]
        out[0] = v if v < 0.0 else 0.0
        return out
    best = NEG_INF
    for k in range(n):
        if k == i:
            continue
        v = summed_row[k]
        if v > best:
            best = v
    shift = kappa * best
    for j in range(n):
        val = s_row[j] + shift
        out[j] = val if val < 0.0 else 0.0
    return out


@njit(cache=True)
def damp_vec(old, new, lam):
    n = old.shape[0]
    om = 1.0 - lam
    out = np.empty(n, dtype=np.float64)
    for k in range(n):
        out[k] = lam * old[k] + om * new[k]
    return out


@njit(cache=True)
def resp_matrix(s_mat, alpha_mat, tau_vec):
    n = s_mat.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        out[i, :] = resp_row(s_mat[i, :], alpha_mat[i, :], tau_vec[i])
    return out


@njit(cache=True)
def avail_matrix(rho_mat, c_vec, phi_vec):
    n = rho_mat.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for j in range(n):
        col = avail_col(rho_mat[:, j].copy(), j, c_vec[j], phi_vec[j])
        out[:, j] = col
    return out


@njit(cache=True)
def tau_vec_all(rho_mat_below, c_vec_below):
    n = rho_mat_below.shape[0]
    out = np.empty(n, dtype=np.float64)
    for j in range(n):
        out[j] = tau_scalar(rho_mat_below[:, j].copy(), j, c_vec_below[j])
    return out


@njit(cache=True)
def phi_vec_all(alpha_mat_above, s_mat_above):
    n = alpha_mat_above.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = phi_scalar(alpha_mat_above[i, :], s_mat_above[i, :])
    return out


@njit(cache=True)
def cpref_vec_all(alpha_mat, rho_mat):
    n = alpha_mat.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = cpref_scalar(alpha_mat[i, :], rho_mat[i, :])
    return out


@njit(cache=True)
def extract_vec_all(alpha_mat, rho_mat):
    n = alpha_mat.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = extract_scalar(alpha_mat[i, :], rho_mat[i, :])
    return out


@njit(cache=True)
def eq7_matrix(s_mat, alpha_mat, rho_mat, kappa):
    n = s_mat.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    summed = np.empty(n, dtype=np.float64)
    for i in range(n):
        for k in range(n):
            summed[k] = alpha_mat[i, k] + rho_mat[i, k]
        out[i, :] = shift_clamp(s_mat[i, :], i, summed, kappa)
    return out


@njit(cache=True)
def damp_mat(old, new, lam):
    n = old.shape[0]
    m = old.shape[1]
    om = 1.0 - lam
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        for k in range(m):
            out[i, k] = lam * old[i, k] + om * new[i, k]
    return out
