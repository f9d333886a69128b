"""Single-process reference engine.

Two update schedules are provided:

* gauss-seidel: the textbook sweep. Levels are processed in ascending order
  each iteration; within a level the order is responsibility, availability,
  then the tau/phi/c support updates, then the optional similarity level
  update. Later levels in the same iteration therefore see values written
  earlier in that iteration.
* jacobi: every update in an iteration reads the state the iteration started
  from, except that responsibility consumes the tau refreshed in the same
  iteration and availability consumes the refreshed rho, c, and phi. This is
  exactly the staleness pattern the parallel engine's two-job-per-iteration
  dataflow produces, so a jacobi run here is the bit-level oracle for it.

Support values obey two structural facts for the whole run: tau at the base
level stays +inf (there is no level below to constrain it) and phi at the
top level stays 0 (there is no level above to pull from).
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .config import SCHEDULE_GAUSS_SEIDEL, SCHEDULE_JACOBI, RunConfig
from .errors import InvalidConfig
from .tensors import AssignmentTable, MessageState, SimilarityTensor, init_state


def extract_assignments(state: MessageState) -> AssignmentTable:
    """argmax of alpha + rho per row at every level, ties to lowest index."""
    lvls, n = state.levels, state.n
    e = np.empty((lvls, n), dtype=np.int64)
    for lv in range(lvls):
        e[lv] = kernels.extract_vector(state.alpha[lv], state.rho[lv])
    return AssignmentTable(e)


def _iterate_gauss_seidel(st: MessageState, cfg: RunConfig) -> None:
    lvls, n = st.levels, st.n
    lam = cfg.damping
    for lv in range(lvls):
        if n >= 2:
            new_rho = kernels.responsibility_matrix(
                st.s.values[lv], st.alpha[lv], st.tau[lv]
            )
            st.rho[lv] = kernels.damp_matrix(st.rho[lv], new_rho, lam)
        new_alpha = kernels.availability_matrix(st.rho[lv], st.c[lv], st.phi[lv])
        st.alpha[lv] = kernels.damp_matrix(st.alpha[lv], new_alpha, lam)
        if lv + 1 < lvls:
            # c not yet refreshed at this level, so tau sees last iteration's
            st.tau[lv + 1] = kernels.tau_vector(st.rho[lv], st.c[lv])
        if lv > 0:
            st.phi[lv - 1] = kernels.phi_vector(st.alpha[lv], st.s.values[lv])
        st.c[lv] = kernels.cluster_preference_vector(st.alpha[lv], st.rho[lv])
        if cfg.kappa is not None and lv + 1 < lvls:
            st.s.values[lv + 1] = kernels.similarity_matrix_update(
                st.s.values[lv], st.alpha[lv], st.rho[lv], cfg.kappa
            )


def _iterate_jacobi(st: MessageState, cfg: RunConfig, iteration: int) -> MessageState:
    lvls, n = st.levels, st.n
    lam = cfg.damping
    s_in, a_in, r_in = st.s.values, st.alpha, st.rho
    t_in, p_in, c_in = st.tau, st.phi, st.c

    s_new = s_in.copy()
    if cfg.kappa is not None and iteration >= 2:
        for lv in range(1, lvls):
            s_new[lv] = kernels.similarity_matrix_update(
                s_in[lv - 1], a_in[lv - 1], r_in[lv - 1], cfg.kappa
            )

    if iteration >= 2:
        c_new = np.empty_like(c_in)
        t_new = np.empty_like(t_in)
        for lv in range(lvls):
            c_new[lv] = kernels.cluster_preference_vector(a_in[lv], r_in[lv])
        t_new[0] = t_in[0]
        for lv in range(1, lvls):
            t_new[lv] = kernels.tau_vector(r_in[lv - 1], c_in[lv - 1])
    else:
        c_new, t_new = c_in.copy(), t_in.copy()

    r_new = np.empty_like(r_in)
    for lv in range(lvls):
        if n >= 2:
            raw = kernels.responsibility_matrix(s_new[lv], a_in[lv], t_new[lv])
            r_new[lv] = kernels.damp_matrix(r_in[lv], raw, lam)
        else:
            r_new[lv] = r_in[lv]

    p_new = np.empty_like(p_in)
    p_new[lvls - 1] = 0.0
    for lv in range(lvls - 1):
        p_new[lv] = kernels.phi_vector(a_in[lv + 1], s_new[lv + 1])

    a_new = np.empty_like(a_in)
    for lv in range(lvls):
        raw = kernels.availability_matrix(r_new[lv], c_new[lv], p_new[lv])
        a_new[lv] = kernels.damp_matrix(a_in[lv], raw, lam)

    return MessageState(
        s=SimilarityTensor(s_new),
        alpha=a_new,
        rho=r_new,
        tau=t_new,
        phi=p_new,
        c=c_new,
        iteration=iteration,
    )


def _check(s: SimilarityTensor, cfg: RunConfig) -> None:
    if s.levels != cfg.levels:
        raise InvalidConfig(
            f"config says {cfg.levels} levels but the tensor has {s.levels}"
        )


def run_sequential(
    s: SimilarityTensor,
    cfg: RunConfig,
    timings: list | None = None,
) -> tuple[MessageState, AssignmentTable]:
    """Run the configured number of iterations and extract assignments.

    When `timings` is a list, one (iteration, "iterate", wall_ms) triple is
    appended per iteration.
    """
    _check(s, cfg)
    schedule = cfg.resolved_schedule()
    st = init_state(s)
    for it in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        if schedule == SCHEDULE_GAUSS_SEIDEL:
            _iterate_gauss_seidel(st, cfg)
            st.iteration = it
        elif schedule == SCHEDULE_JACOBI:
            st = _iterate_jacobi(st, cfg, it)
        else:
            raise InvalidConfig(f"unknown schedule {schedule!r}")
        if timings is not None:
            timings.append((it, "iterate", (time.perf_counter() - t0) * 1e3))
    return st, extract_assignments(st)


def replay_iterations(
    s: SimilarityTensor, cfg: RunConfig, snapshot_every: int
):
    """Yield deep state snapshots after every `snapshot_every` iterations.

    With snapshot_every == cfg.iterations exactly one snapshot is produced,
    equal to the final state of run_sequential under the same config.
    """
    _check(s, cfg)
    if snapshot_every < 1:
        raise InvalidConfig(f"snapshot_every must be >= 1, got {snapshot_every}")
    schedule = cfg.resolved_schedule()
    st = init_state(s)
    for it in range(1, cfg.iterations + 1):
        if schedule == SCHEDULE_GAUSS_SEIDEL:
            _iterate_gauss_seidel(st, cfg)
            st.iteration = it
        elif schedule == SCHEDULE_JACOBI:
            st = _iterate_jacobi(st, cfg, it)
        else:
            raise InvalidConfig(f"unknown schedule {schedule!r}")
        if it % snapshot_every == 0:
            yield st.copy()
