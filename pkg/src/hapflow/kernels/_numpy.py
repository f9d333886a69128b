"""Pure-numpy message-update kernels, bit-compatible with the compiled path.

Sums use np.add.accumulate (strict sequential order, matching a left-to-right
loop), maxima use first-occurrence argmax followed by indexing (never a
reduce, whose pairing order is unspecified for signed zeros), and min/clamp
branches use np.where with the same comparison the compiled loop uses.
"""

import numpy as np

NEG_INF = -np.inf


def _pos(x):
    return np.where(x > 0.0, x, 0.0)


def pos_total(col):
    if col.shape[0] == 0:
        return 0.0
    return float(np.add.accumulate(_pos(col))[-1])


def resp_row(s_row, alpha_row, tau_i):
    m = alpha_row + s_row
    arg = int(np.argmax(m))
    best = m[arg]
    m2 = m.copy()
    m2[arg] = NEG_INF
    second = m2[int(np.argmax(m2))]
    idx = np.arange(m.shape[0])
    bound = np.where(idx == arg, -second, -best)
    t = np.where(tau_i < bound, tau_i, bound)
    return s_row + t


def avail_col(rho_col, j, c_j, phi_j):
    pos = _pos(rho_col)
    total = np.add.accumulate(pos)[-1]
    rj = rho_col[j]
    pj = pos[j]
    sum_wo_j = total - pj
    base = c_j + phi_j
    head = base + rj
    vals = head + (sum_wo_j - pos)
    out = np.where(vals < 0.0, vals, 0.0)
    out[j] = base + sum_wo_j
    return out


def tau_scalar(rho_col, j, c_j):
    total = np.add.accumulate(_pos(rho_col))[-1]
    rj = rho_col[j]
    pj = rj if rj > 0.0 else 0.0
    return float((c_j + rj) + (total - pj))


def phi_scalar(alpha_row, s_row):
    m = alpha_row + s_row
    return float(m[int(np.argmax(m))])


def cpref_scalar(alpha_row, rho_row):
    m = alpha_row + rho_row
    return float(m[int(np.argmax(m))])


def extract_scalar(alpha_row, rho_row):
    return int(np.argmax(alpha_row + rho_row))


def shift_clamp(s_row, i, summed_row, kappa):
    n = s_row.shape[0]
    if n == 1:
        return np.where(s_row < 0.0, s_row, 0.0)
    m2 = summed_row.astype(np.float64, copy=True)
    m2[i] = NEG_INF
    best = m2[int(np.argmax(m2))]
    shift = kappa * best
    vals = s_row + shift
    return np.where(vals < 0.0, vals, 0.0)


def damp_vec(old, new, lam):
    return lam * old + (1.0 - lam) * new


def resp_matrix(s_mat, alpha_mat, tau_vec):
    n = s_mat.shape[0]
    m = alpha_mat + s_mat
    rows = np.arange(n)
    arg = np.argmax(m, axis=1)
    best = m[rows, arg]
    m2 = m.copy()
    m2[rows, arg] = NEG_INF
    second = m2[rows, np.argmax(m2, axis=1)]
    cols = rows[None, :]
    bound = np.where(cols == arg[:, None], -second[:, None], -best[:, None])
    tt = tau_vec[:, None]
    t = np.where(tt < bound, tt, bound)
    return s_mat + t


def avail_matrix(rho_mat, c_vec, phi_vec):
    n = rho_mat.shape[0]
    pos = _pos(rho_mat)
    totals = np.add.accumulate(pos, axis=0)[-1, :]
    diag_r = np.diagonal(rho_mat).copy()
    pdiag = np.where(diag_r > 0.0, diag_r, 0.0)
    sum_wo = totals - pdiag
    base = c_vec + phi_vec
    head = base + diag_r
    vals = head[None, :] + (sum_wo[None, :] - pos)
    out = np.where(vals < 0.0, vals, 0.0)
    rows = np.arange(n)
    out[rows, rows] = base + sum_wo
    return out


def tau_vec_all(rho_mat_below, c_vec_below):
    pos = _pos(rho_mat_below)
    totals = np.add.accumulate(pos, axis=0)[-1, :]
    diag_r = np.diagonal(rho_mat_below).copy()
    pdiag = np.where(diag_r > 0.0, diag_r, 0.0)
    return (c_vec_below + diag_r) + (totals - pdiag)


def phi_vec_all(alpha_mat_above, s_mat_above):
    n = alpha_mat_above.shape[0]
    m = alpha_mat_above + s_mat_above
    rows = np.arange(n)
    return m[rows, np.argmax(m, axis=1)]


def cpref_vec_all(alpha_mat, rho_mat):
    n = alpha_mat.shape[0]
    m = alpha_mat + rho_mat
    rows = np.arange(n)
    return m[rows, np.argmax(m, axis=1)]


def extract_vec_all(alpha_mat, rho_mat):
    return np.argmax(alpha_mat + rho_mat, axis=1).astype(np.int64)


def eq7_matrix(s_mat, alpha_mat, rho_mat, kappa):
    n = s_mat.shape[0]
    if n == 1:
        return np.where(s_mat < 0.0, s_mat, 0.0)
    e = alpha_mat + rho_mat
    rows = np.arange(n)
    e2 = e.copy()
    e2[rows, rows] = NEG_INF
    best = e2[rows, np.argmax(e2, axis=1)]
    vals = s_mat + (kappa * best)[:, None]
    return np.where(vals < 0.0, vals, 0.0)


def damp_mat(old, new, lam):
    return lam * old + (1.0 - lam) * new
