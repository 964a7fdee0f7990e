"""Nested-partition structure: aggregation and detail filters."""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

import gamblets as gb
from gamblets import EmptyPointSet, TooLarge, UnsupportedDim

S = 1 / np.sqrt(2)


def test_dyadic_1d_q2_filters_frozen():
    h = gb.build_dyadic(1, 2)
    assert h.sizes == [2, 4]
    assert h.j_sizes == [2, 2]
    assert_allclose(h.pi_of(1), [[S, S, 0, 0], [0, 0, S, S]])
    assert_allclose(h.w_of(2), [[S, -S, 0, 0], [0, 0, S, -S]])


def test_dyadic_2d_q2_shapes():
    h = gb.build_dyadic(2, 2)
    assert h.sizes == [4, 16]
    assert h.pi_of(1).shape == (4, 16)
    assert h.w_of(2).shape == (12, 16)


@pytest.mark.parametrize("dim,q", [(1, 2), (1, 3), (1, 4), (2, 2), (2, 3)])
def test_dyadic_filter_orthogonality(dim, q):
    """[pi; W] stacked has orthonormal rows at every level."""
    h = gb.build_dyadic(dim, q)
    assert h.sizes == [(2 ** dim) ** k for k in range(1, q + 1)]
    for k in range(2, q + 1):
        pi = h.pi_of(k - 1)
        w = h.w_of(k)
        n = h.sizes[k - 1]
        stacked = np.vstack([pi, w])
        assert stacked.shape == (n, n)
        assert_allclose(stacked @ stacked.T, np.eye(n), rtol=0, atol=1e-12)


def test_pi_prod_composes():
    h = gb.build_dyadic(1, 4)
    assert_allclose(h.pi_prod(1, 4), h.pi_of(1) @ h.pi_of(2) @ h.pi_of(3), atol=1e-14)
    assert_allclose(h.pi_prod(3, 3), np.eye(h.sizes[2]), atol=0)


def test_cell_geometry_1d():
    h = gb.build_dyadic(1, 3)
    assert_allclose(h.cell_centers[2][:, 0], (np.arange(8) + 0.5) / 8)
    assert_allclose(h.cell_volumes[2], np.full(8, 1 / 8))
    assert h.h == 0.5


# ---------------------------------------------------------------------------
# Point hierarchies.

def test_points_pi_rows_unit_norm():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(40, 2))
    h = gb.build_from_points(pts, 3)
    assert h.kind == "points"
    for k in range(1, h.q):
        pi = h.pi_of(k)
        assert_allclose(np.sum(pi ** 2, axis=1), 1.0, atol=1e-12)
    # every input point is assigned a fine box
    assert h.point_fine_label.shape == (40,)
    assert h.point_fine_label.max() < h.n_fine


def test_points_detail_rows_orthonormal():
    rng = np.random.default_rng(1)
    pts = rng.uniform(size=(64, 2))
    h = gb.build_from_points(pts, 3)
    for k in range(2, h.q + 1):
        stacked = np.vstack([h.pi_of(k - 1), h.w_of(k)])
        assert_allclose(stacked @ stacked.T, np.eye(h.sizes[k - 1]), atol=1e-12)


def test_points_degenerate_level_merged(caplog):
    # One point per quadrant: the level-2 boxes repeat the level-1 split,
    # so the coarser level carries no detail and is dropped.
    pts = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
    with caplog.at_level(logging.WARNING):
        h = gb.build_from_points(pts, 2)
    assert h.q == 1
    assert h.sizes == [4]
    assert h.merged_levels == (1,)
    assert any("degenerate" in rec.message for rec in caplog.records)


def test_points_single_point_collapses():
    h = gb.build_from_points(np.array([[0.5, 0.5]]), 3)
    assert h.q == 1
    assert h.sizes == [1]
    assert h.merged_levels == (1, 2)


def test_points_counts_recorded():
    pts = np.array([[0.1, 0.1], [0.12, 0.11], [0.9, 0.9]])
    h = gb.build_from_points(pts, 1)
    assert h.points_per_box_range == [(1, 2)]


def test_points_rejects_empty_and_oversized():
    with pytest.raises(EmptyPointSet):
        gb.build_from_points(np.empty((0, 2)), 2)
    with pytest.raises(TooLarge):
        gb.build_from_points(np.linspace(0, 1, 4097).reshape(-1, 1), 2)
    with pytest.raises(EmptyPointSet):
        gb.build_from_points(np.array([[1.5, 0.5]]), 2)


def test_rejects_unsupported_dimension():
    with pytest.raises(UnsupportedDim):
        gb.build_dyadic(3, 2)
    with pytest.raises(UnsupportedDim):
        gb.build_from_points(np.zeros((4, 3)), 2)


def test_json_round_trip(hier_1d_q4):
    back = gb.hierarchy_from_json(hier_1d_q4.to_json())
    assert back.sizes == hier_1d_q4.sizes
    assert back.dim == hier_1d_q4.dim
    for k in range(1, back.q):
        assert_allclose(back.pi_of(k), hier_1d_q4.pi_of(k), atol=0)
    assert back.sha256() == hier_1d_q4.sha256()
