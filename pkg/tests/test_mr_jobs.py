"""Pipeline jobs: cross-engine equality, boundaries, routing, restart."""

from __future__ import annotations

import numpy as np
import pytest

from hapflow.config import SCHEDULE_JACOBI, RunConfig
from hapflow.engine_sequential import run_sequential
from hapflow.errors import InvalidConfig, MissingAux
from hapflow.kernels import damp, responsibility_row
from hapflow.mr_jobs import (
    AUX_TAU_C,
    AUX_TAU_DIAG,
    AUX_TAU_SUM,
    PipelineParams,
    SupportResponsibilityReducer,
    drive,
    job1_rho_c_tau,
    job3_extract,
)
from hapflow.mr_runtime import execute
from hapflow.tensors import (
    ORIENT_EXEMPLAR,
    ORIENT_NODE,
    TAG_ALPHA,
    TAG_AUX,
    TAG_C,
    TAG_PHI,
    TAG_RHO,
    TAG_S,
    TAG_TAU,
    SimilarityTensor,
    from_records,
    init_state,
    read_spill,
    states_equal,
    to_records,
)

from helpers import random_similarity

MR = {"engine": "mapreduce"}


def jacobi(cfg: RunConfig) -> RunConfig:
    return cfg.with_updates(engine="sequential", schedule=SCHEDULE_JACOBI)


@pytest.mark.parametrize(
    "n,levels,iterations,kappa",
    [
        (5, 1, 2, None),
        (6, 2, 5, None),
        (7, 3, 5, None),
        (6, 2, 5, 0.3),
        (4, 3, 3, 1.0),
        (2, 1, 3, 0.7),
    ],
)
def test_pipeline_equals_two_phase_reference_bitwise(n, levels, iterations, kappa):
    s = random_similarity(n, levels, seed=n * 31 + levels)
    cfg = RunConfig(
        levels=levels, iterations=iterations, kappa=kappa, **MR
    )
    st_mr, tb_mr = drive(s, cfg)
    st_sq, tb_sq = run_sequential(s, jacobi(cfg))
    assert states_equal(st_mr, st_sq)
    np.testing.assert_array_equal(tb_mr.exemplars, tb_sq.exemplars)


def test_single_point_degenerates_gracefully():
    s = random_similarity(1, 2, seed=9)
    cfg = RunConfig(levels=2, iterations=4, **MR)
    st_mr, tb_mr = drive(s, cfg)
    st_sq, tb_sq = run_sequential(s, jacobi(cfg))
    assert states_equal(st_mr, st_sq)
    assert tb_mr.exemplars.tolist() == [[0], [0]]


def test_worker_counts_are_interchangeable():
    s = random_similarity(8, 2, seed=12)
    cfg = RunConfig(levels=2, iterations=4, kappa=0.4, **MR)
    base_st, base_tb = drive(s, cfg)
    for workers in (2, 4):
        st, tb = drive(s, cfg.with_updates(workers=workers))
        assert states_equal(base_st, st)
        np.testing.assert_array_equal(base_tb.exemplars, tb.exemplars)


def test_first_iteration_keeps_initial_tau_and_c(tmp_path):
    s = random_similarity(5, 3, seed=13)
    cfg = RunConfig(levels=3, iterations=4, **MR)
    drive(s, cfg, workdir=str(tmp_path), stop_after=1)
    after_job1 = from_records(read_spill(str(tmp_path / "it001-node.spill")))
    assert np.all(np.isinf(after_job1.tau)) and np.all(after_job1.tau > 0)
    assert np.all(after_job1.c == 0.0)


def test_boundaries_alternate_orientation_and_conserve_state(tmp_path):
    n, levels = 5, 2
    s = random_similarity(n, levels, seed=14)
    cfg = RunConfig(levels=levels, iterations=2, kappa=0.5, **MR)
    drive(s, cfg, workdir=str(tmp_path))

    for it in (1, 2):
        node = read_spill(str(tmp_path / f"it{it:03d}-node.spill"))
        exem = read_spill(str(tmp_path / f"it{it:03d}-exemplar.spill"))
        assert all(r.key.orientation == ORIENT_NODE for r in node)
        assert all(r.key.orientation == ORIENT_EXEMPLAR for r in exem)
        # complete snapshot at either side: 3 matrices + 3 vectors per level
        assert len(node) == 3 * levels * n + 3 * levels
        aux = [r for r in exem if r.key.tag == TAG_AUX]
        assert len(exem) - len(aux) == 3 * levels * n + 3 * levels
        # the shift column goes up from every level but the top
        assert len(aux) == (levels - 1) * n
        from_records(node)
        from_records(exem)


def test_responsibility_rows_after_one_pass_match_kernels(tmp_path):
    n = 3
    s = random_similarity(n, 1, seed=15)
    cfg = RunConfig(iterations=3, damping=0.5, **MR)
    drive(s, cfg, workdir=str(tmp_path), stop_after=1)
    node = read_spill(str(tmp_path / "it001-node.spill"))
    zeros = np.zeros(n)
    for rec in node:
        if rec.key.tag != TAG_RHO:
            continue
        i = rec.key.index
        expected = damp(
            zeros, responsibility_row(s.values[0][i], zeros, np.inf), 0.5
        )
        np.testing.assert_array_equal(rec.value, expected)


def test_similarity_passes_through_reformatted(tmp_path):
    s = random_similarity(4, 2, seed=16)
    cfg = RunConfig(levels=2, iterations=1, **MR)
    drive(s, cfg, workdir=str(tmp_path))
    node = read_spill(str(tmp_path / "it001-node.spill"))
    for rec in node:
        if rec.key.tag == TAG_S:
            lv = rec.key.level - 1
            np.testing.assert_array_equal(rec.value, s.values[lv][rec.key.index])


def test_second_job_zeroes_top_level_phi_and_caps_alpha(tmp_path):
    s = random_similarity(6, 2, seed=17)
    cfg = RunConfig(levels=2, iterations=3, **MR)
    st, _ = drive(s, cfg, workdir=str(tmp_path))
    assert np.all(st.phi[1] == 0.0)
    for lv in range(2):
        off = st.alpha[lv].copy()
        np.fill_diagonal(off, 0.0)
        assert np.all(off <= 0.0)


def test_availability_columns_match_reference_after_one_iteration():
    s = random_similarity(3, 2, seed=18)
    cfg = RunConfig(levels=2, iterations=1, **MR)
    st_mr, _ = drive(s, cfg)
    st_sq, _ = run_sequential(s, jacobi(cfg))
    np.testing.assert_array_equal(st_mr.alpha, st_sq.alpha)


def craft_state(alpha, rho) -> "tuple":
    levels, n = alpha.shape[0], alpha.shape[1]
    s = SimilarityTensor(np.zeros((levels, n, n)))
    st = init_state(s)
    st.alpha = alpha.astype(np.float64)
    st.rho = rho.astype(np.float64)
    return st, PipelineParams(levels=levels, n=n, damping=0.5)


def extract_map(records, params):
    out, _ = execute(job3_extract(params, input=records))
    return {(r.key.index, r.key.level): int(r.value.value) for r in out}


def test_extraction_takes_strict_argmax():
    n = 7
    rho = np.zeros((1, n, n))
    rho[0, :, 5] = 1.0  # strict winner at column 5 for every row
    st, params = craft_state(np.zeros((1, n, n)), rho)
    got = extract_map(to_records(st, ORIENT_EXEMPLAR), params)
    assert got == {(i, 1): 5 for i in range(n)}


def test_extraction_single_point_every_level():
    st, params = craft_state(np.zeros((2, 1, 1)), np.zeros((2, 1, 1)))
    got = extract_map(to_records(st, ORIENT_EXEMPLAR), params)
    assert got == {(0, 1): 0, (0, 2): 0}


def test_reducer_demands_routed_support_scalars():
    params = PipelineParams(levels=2, n=2, damping=0.5)
    reducer = SupportResponsibilityReducer(params, iteration=2)
    values = []
    for tag in (TAG_S, TAG_ALPHA, TAG_RHO):
        values += [(tag, 0, -1.0), (tag, 1, -2.0)]
    values += [(TAG_TAU, 0, np.inf), (TAG_PHI, 0, 0.0), (TAG_C, 0, 0.0)]
    # key sits on level 2 so tau must come from the level below; it did not
    with pytest.raises(MissingAux, match=AUX_TAU_C):
        list(reducer((0, 2), sorted(values, key=lambda v: (v[0], v[1]))))
    complete = values + [
        (AUX_TAU_C, 0, 0.0),
        (AUX_TAU_DIAG, 0, -1.0),
        (AUX_TAU_SUM, 0, 0.0),
    ]
    out = list(reducer((0, 2), sorted(complete, key=lambda v: (v[0], v[1]))))
    assert len(out) == 6


def test_restart_resumes_from_persisted_boundary(tmp_path):
    s = random_similarity(6, 2, seed=19)
    cfg = RunConfig(levels=2, iterations=5, kappa=0.2, **MR)
    wd = tmp_path / "wd"

    drive(s, cfg, workdir=str(wd), stop_after=2)  # killed mid-run
    timings = []
    st_resumed, tb_resumed = drive(s, cfg, workdir=str(wd), timings=timings)
    st_fresh, tb_fresh = drive(s, cfg)
    assert states_equal(st_resumed, st_fresh)
    np.testing.assert_array_equal(tb_resumed.exemplars, tb_fresh.exemplars)
    # the first two iterations were not re-executed
    executed = {(it, job) for it, job, _ in timings}
    assert (1, "rho-c-tau") not in executed and (2, "alpha-phi") not in executed
    assert (3, "rho-c-tau") in executed


def test_workdir_rejects_foreign_spills(tmp_path):
    cfg = RunConfig(levels=1, iterations=2, **MR)
    drive(random_similarity(4, 1, seed=20), cfg, workdir=str(tmp_path))
    with pytest.raises(InvalidConfig, match="different run"):
        drive(random_similarity(4, 1, seed=21), cfg, workdir=str(tmp_path))


def test_drive_validates_shape_and_schedule():
    s = random_similarity(4, 2, seed=22)
    with pytest.raises(InvalidConfig):
        drive(s, RunConfig(levels=1, iterations=2, **MR))
    with pytest.raises(InvalidConfig, match="jacobi"):
        drive(s, RunConfig(levels=2, iterations=2, schedule="gauss-seidel"))


def test_job_builders_validate_iteration():
    params = PipelineParams(levels=1, n=2, damping=0.5)
    with pytest.raises(InvalidConfig):
        job1_rho_c_tau(0, params)


def test_timing_lines_name_every_executed_job():
    s = random_similarity(4, 1, seed=23)
    timings = []
    drive(s, RunConfig(iterations=2, **MR), timings=timings)
    assert [(it, job) for it, job, _ in timings] == [
        (1, "rho-c-tau"),
        (1, "alpha-phi"),
        (2, "rho-c-tau"),
        (2, "alpha-phi"),
        (2, "extract"),
    ]
