import numpy as np
import pytest

from wellgeo.errors import ArgumentError, UnsupportedDimensionError
from wellgeo.geodesic import SolveOptions, minimize_E
from wellgeo.oracle import KNIGHT_BOUND, OCTILE_BOUND, GridSpec, flat_potential, grid_distance, stencil
from wellgeo.potential import make_double_well, make_six_well


def test_flat_metric_octile_band():
    spec = GridSpec((-1, -1), (4, 5), (61, 73))
    r = grid_distance(flat_potential(2), [0, 0], [3, 4], spec)
    assert 5.0 <= r.cost <= 5.0 * (1 + OCTILE_BOUND)
    assert r.snap_distance == (0.0, 0.0)


def test_flat_metric_knight_band():
    spec = GridSpec((-1, -1), (4, 5), (61, 73), reach=2)
    r = grid_distance(flat_potential(2), [0, 0], [3, 4], spec)
    assert 5.0 <= r.cost <= 5.0 * (1 + KNIGHT_BOUND)


def test_double_well_band():
    spec = GridSpec((-1.5, -1.0), (1.5, 1.0), 600)
    r = grid_distance(make_double_well(), [-1, 0], [1, 0], spec)
    assert 2 / 3 * 0.98 <= r.cost <= 2 / 3 * 1.09


def test_same_point_costs_nothing(double_well):
    spec = GridSpec((-1.5, -1.0), (1.5, 1.0), 64)
    r = grid_distance(double_well, [0.2, 0.1], [0.2, 0.1], spec)
    assert r.cost == 0.0
    assert r.path.nodes.shape[0] == 1


def test_symmetry(double_well):
    spec = GridSpec((-1.5, -1.0), (1.5, 1.0), 80, reach=2)
    a = grid_distance(double_well, [-1, 0], [0.7, 0.4], spec)
    b = grid_distance(double_well, [0.7, 0.4], [-1, 0], spec)
    assert a.cost == b.cost


def test_refinement_on_nested_flat_grids():
    # n -> 2n - 1 nodes keeps every coarse node, so the fine graph contains the coarse one
    flat = flat_potential(2)
    costs = []
    for n in (21, 41, 81):
        spec = GridSpec((0, 0), (3, 4), n)
        costs.append(grid_distance(flat, [0, 0], [3, 4], spec).cost)
    assert costs[1] <= costs[0] + 1e-12 and costs[2] <= costs[1] + 1e-12


def test_refinement_double_well_within_quadrature_slack(double_well):
    costs = [
        grid_distance(double_well, [-1, 0], [1, 0], GridSpec((-1.5, -1.0), (1.5, 1.0), (n, 2 * n // 3 + 1))).cost
        for n in (61, 121, 241)
    ]
    assert costs[1] <= costs[0] + 1e-3 and costs[2] <= costs[1] + 1e-3


def test_three_dimensional_oracle_matches_solver():
    pot = make_six_well()
    spec = GridSpec.around(pot.well_points, 49, margin=0.15, reach=2)
    r = grid_distance(pot, pot.wells[0].point, pot.wells[2].point, spec)
    d = minimize_E(pot, pot.wells[0].point, pot.wells[2].point, SolveOptions(node_count=128)).energy
    assert abs(r.cost - d) < 3e-2 * d


def test_stencil_sizes():
    assert len(stencil(2, 1)[0]) == 8
    assert len(stencil(3, 1)[0]) == 26
    assert len(stencil(2, 2)[0]) == 16
    assert len(stencil(3, 2)[0]) == 98


def test_rejects_points_outside_box(double_well):
    spec = GridSpec((-0.5, -0.5), (0.5, 0.5), 32)
    with pytest.raises(ArgumentError):
        grid_distance(double_well, [-1, 0], [0, 0], spec)


def test_rejects_high_dimension():
    with pytest.raises(UnsupportedDimensionError):
        GridSpec((0,) * 4, (1,) * 4, 16)
    pot = make_double_well(N=4)
    spec = GridSpec((0, 0), (1, 1), 16)
    with pytest.raises(UnsupportedDimensionError):
        grid_distance(pot, [0] * 4, [1] * 4, spec)


@pytest.mark.parametrize(
    "kwargs",
    [dict(lower=(0, 0), upper=(1, 1), resolution=8), dict(lower=(0, 0), upper=(0, 1), resolution=32),
     dict(lower=(0, 0), upper=(1, 1), resolution=32, reach=3)],
)
def test_spec_validation(kwargs):
    with pytest.raises(ArgumentError):
        GridSpec(**kwargs)


def test_path_ends_at_snapped_nodes(double_well):
    spec = GridSpec((-1.5, -1.0), (1.5, 1.0), 50)
    r = grid_distance(double_well, [-1, 0], [1, 0.01], spec)
    np.testing.assert_array_equal(r.path.nodes[0], r.snapped[0])
    np.testing.assert_array_equal(r.path.nodes[-1], r.snapped[1])
    assert r.snap_distance[1] > 0 and r.snap_drift >= 0
    assert set(r.to_dict()) >= {"cost", "snapped", "snap_drift"}
