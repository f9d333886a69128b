"""Ingestion and similarity construction: metrics, preferences, file formats."""

from __future__ import annotations

import numpy as np
import pytest

from hapflow.errors import (
    DimensionMismatch,
    InvalidRange,
    ParseError,
    PositiveSimilarity,
)
from hapflow.similarity import (
    METRIC_NEG_EUCLIDEAN,
    METRIC_NEG_SQ_EUCLIDEAN,
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
from hapflow.tensors import SimilarityTensor

MEDIAN = PreferenceStrategy.parse("median")


# --- metrics ----------------------------------------------------------------


def test_squared_distance_between_known_points():
    ps = PointSet(np.array([[0.0, 0.0], [3.0, 4.0]]))
    s = similarity_from_points(ps, METRIC_NEG_SQ_EUCLIDEAN, 1, MEDIAN)
    assert s.values[0, 0, 1] == -25.0 and s.values[0, 1, 0] == -25.0


def test_plain_distance_between_known_points():
    ps = PointSet(np.array([[0.0, 0.0], [3.0, 4.0]]))
    s = similarity_from_points(ps, METRIC_NEG_EUCLIDEAN, 1, MEDIAN)
    assert s.values[0, 0, 1] == -5.0


def test_single_point_matrix_is_its_preference():
    ps = PointSet(np.array([[7.0]]))
    s = similarity_from_points(
        ps, METRIC_NEG_SQ_EUCLIDEAN, 1, PreferenceStrategy.parse("constant:-2")
    )
    assert s.values.shape == (1, 1, 1) and s.values[0, 0, 0] == -2.0


def test_similarity_symmetric_and_nonpositive():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(40, 3)) * 9.0
    for metric in (METRIC_NEG_EUCLIDEAN, METRIC_NEG_SQ_EUCLIDEAN):
        m = pairwise_similarity(pts, metric)
        np.testing.assert_array_equal(m, m.T)
        assert np.all(m <= 0.0)


def test_metric_consistency():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(25, 2)) * 4.0
    d1 = pairwise_similarity(pts, METRIC_NEG_EUCLIDEAN)
    d2 = pairwise_similarity(pts, METRIC_NEG_SQ_EUCLIDEAN)
    off = ~np.eye(25, dtype=bool)
    np.testing.assert_allclose(-(d1[off] ** 2), d2[off], rtol=1e-12)


def test_levels_replicate_base_matrix():
    ps = PointSet(np.arange(8.0).reshape(4, 2))
    s = similarity_from_points(ps, METRIC_NEG_SQ_EUCLIDEAN, 3, MEDIAN)
    np.testing.assert_array_equal(s.values[0], s.values[1])
    np.testing.assert_array_equal(s.values[0], s.values[2])


def test_unknown_metric_rejected():
    with pytest.raises(InvalidRange):
        pairwise_similarity(np.zeros((2, 2)), "cosine")


# --- preferences ------------------------------------------------------------


def test_constant_zero_maximal_preference():
    s = SimilarityTensor.from_matrix(-np.ones((3, 3)), 2)
    out = apply_preferences(s, PreferenceStrategy.parse("constant:0"), 0)
    for lv in range(2):
        np.testing.assert_array_equal(np.diag(out.values[lv]), np.zeros(3))


def test_random_preferences_seed_deterministic():
    s = SimilarityTensor.from_matrix(-np.ones((5, 5)), 2)
    pref = PreferenceStrategy.parse("random:-100:0")
    a = apply_preferences(s, pref, seed=3)
    b = apply_preferences(s, pref, seed=3)
    np.testing.assert_array_equal(a.values, b.values)
    # one draw, replicated across levels
    np.testing.assert_array_equal(np.diag(a.values[0]), np.diag(a.values[1]))
    c = apply_preferences(s, pref, seed=4)
    assert not np.array_equal(a.values, c.values)


def test_median_preference_of_known_offdiagonals():
    base = np.array(
        [
            [0.0, -1.0, -2.0],
            [-3.0, 0.0, -4.0],
            [-5.0, -6.0, 0.0],
        ]
    )
    out = apply_preferences(SimilarityTensor.from_matrix(base, 1), MEDIAN, 0)
    np.testing.assert_array_equal(np.diag(out.values[0]), [-3.5, -3.5, -3.5])


@pytest.mark.parametrize("text", ["random:-1:-2", "constant:1", "random:0:1", "lowest", "median:x", "constant:abc"])
def test_malformed_preferences_rejected(text):
    with pytest.raises(InvalidRange):
        PreferenceStrategy.parse(text)


# --- point sets and CSV -----------------------------------------------------


def test_points_csv_without_labels(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("0,0\n3,4\n")
    ps = load_points_csv(str(p))
    assert ps.points.shape == (2, 2) and ps.labels is None


def test_points_csv_with_labels(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("0,0,#a\n3,4,#b\n")
    ps = load_points_csv(str(p))
    assert ps.labels == ["a", "b"]


def test_points_csv_ragged_rows(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("0,0\n1,2,3\n")
    with pytest.raises(DimensionMismatch):
        load_points_csv(str(p))


def test_points_csv_mixed_labelling(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("0,0,#a\n3,4\n")
    with pytest.raises(ParseError):
        load_points_csv(str(p))


def test_points_csv_bad_number(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("0,zero\n")
    with pytest.raises(ParseError, match="1"):
        load_points_csv(str(p))


def test_point_set_validation():
    with pytest.raises(DimensionMismatch):
        PointSet(np.zeros((0, 2)))
    with pytest.raises(DimensionMismatch):
        PointSet(np.zeros((3, 2)), labels=["a"])


# --- images -----------------------------------------------------------------


def test_ascii_pixmap_single_red_pixel(tmp_path):
    p = tmp_path / "dot.ppm"
    p.write_text("P3\n1 1\n255\n255 0 0\n")
    grid = load_ppm(str(p))
    assert (grid.width, grid.height) == (1, 1)
    np.testing.assert_array_equal(grid.pixels, [[255, 0, 0]])


def test_pixmap_header_comments_skipped(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_text("P3\n# a comment\n2 1\n# another\n255\n1 2 3 4 5 6\n")
    grid = load_ppm(str(p))
    assert grid.width == 2 and grid.pixels[1].tolist() == [4, 5, 6]


@pytest.mark.parametrize("variant", ["P3", "P6"])
def test_pixmap_roundtrip(tmp_path, variant):
    rng = np.random.default_rng(7)
    px = rng.integers(0, 256, size=(12, 3)).astype(np.uint8)
    grid = PixelGrid(4, 3, px, variant)
    path = tmp_path / "img.ppm"
    write_ppm(grid, str(path))
    back = load_ppm(str(path))
    assert back.variant == variant
    assert (back.width, back.height) == (4, 3)
    np.testing.assert_array_equal(back.pixels, px)


def test_pixmap_rejects_other_depths(tmp_path):
    p = tmp_path / "deep.ppm"
    p.write_text("P3\n1 1\n65535\n0 0 0\n")
    with pytest.raises(ParseError, match="255"):
        load_ppm(str(p))


def test_pixmap_truncated_body(tmp_path):
    p = tmp_path / "short.ppm"
    p.write_text("P3\n2 2\n255\n255 0 0\n")
    with pytest.raises(ParseError):
        load_ppm(str(p))


def test_pixmap_sample_out_of_range(tmp_path):
    p = tmp_path / "hot.ppm"
    p.write_text("P3\n1 1\n255\n999 0 0\n")
    with pytest.raises(ParseError):
        load_ppm(str(p))


def test_image_similarity_channel_distance():
    grid = PixelGrid(1, 2, np.array([[0, 0, 0], [255, 0, 0]], dtype=np.uint8), "P3")
    s = similarity_from_image(grid, METRIC_NEG_EUCLIDEAN, 1, MEDIAN)
    assert s.values[0, 0, 1] == -255.0


@pytest.mark.parametrize("w,h", [(103, 103), (120, 100)])
def test_pixel_count_flattening(w, h):
    grid = PixelGrid(w, h, np.zeros((w * h, 3), dtype=np.uint8), "P6")
    assert grid.to_points().points.shape == (w * h, 3)


def test_recolor_takes_exemplar_color():
    px = np.array([[10, 0, 0], [0, 20, 0], [0, 0, 30]], dtype=np.uint8)
    grid = PixelGrid(3, 1, px, "P3")
    out = grid.recolored(np.array([2, 2, 2]))
    np.testing.assert_array_equal(out.pixels, [[0, 0, 30]] * 3)


# --- raw similarity matrices ------------------------------------------------


def test_matrix_file_loaded_per_level(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 2\n-1 -2\n-3 -4\n-5 -6\n-7 -8\n")
    s = load_similarity_matrix(str(p))
    assert s.levels == 2 and s.n == 2
    np.testing.assert_array_equal(s.values[1], [[-5.0, -6.0], [-7.0, -8.0]])


def test_matrix_file_positive_entry_located(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 1\n0 0.5\n0 0\n")
    with pytest.raises(PositiveSimilarity, match="0.5"):
        load_similarity_matrix(str(p))


def test_matrix_file_truncated(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("3 1\n0 -1 -2\n")
    with pytest.raises(ParseError):
        load_similarity_matrix(str(p))
