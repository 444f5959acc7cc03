import math

import numpy as np
import pytest

from wellgeo.curve import DiscreteCurve, weighted_length
from wellgeo.errors import ArgumentError, GeometryError
from wellgeo.geodesic import SolveOptions
from wellgeo.metric import (
    DEGENERATE,
    STRICT,
    VIOLATED,
    classify_alikakos_fusco,
    classify_slacks,
    default_well_radius,
    distance,
    distance_matrix,
    obstruction_report,
    split_at_wells,
    sweep_epsilon,
)
from wellgeo.oracle import GridSpec, grid_distance
from wellgeo.potential import from_expression, make_alikakos_fusco, make_double_well, make_six_well


@pytest.fixture(scope="module")
def af_matrices():
    return {eps: distance_matrix(make_alikakos_fusco(eps)) for eps in (0.3, 0.9)}


def test_double_well_distance():
    d, r = distance(make_double_well(), 0, 1)
    assert abs(d - 2 / 3) < 2e-3 and r.converged


def test_same_well_rejected():
    with pytest.raises(ArgumentError):
        distance(make_double_well(), 1, 1)


def test_alikakos_fusco_zero_eps_passes_through_origin():
    pot = make_alikakos_fusco(0.0)
    d01, r = distance(pot, 0, 1)
    d02, _ = distance(pot, 0, 2)
    d21, _ = distance(pot, 2, 1)
    assert abs(d01 - (d02 + d21)) < 3e-2 * d01
    assert r.well_proximity[2].distance < 1e-9
    # the lattice agrees on the direct distance
    spec = GridSpec((-1.5, -1.0), (1.5, 1.0), (301, 201), reach=2)
    g = grid_distance(pot, pot.wells[0].point, pot.wells[1].point, spec)
    assert abs(g.cost - d01) < 3e-2 * d01


def test_two_well_matrix():
    dm = distance_matrix(make_double_well())
    assert dm.values.shape == (2, 2)
    assert abs(dm.values[0, 1] - 2 / 3) < 2e-3
    rep = obstruction_report(dm, 1e-6)
    assert [p.classification for p in rep.pairs] == [STRICT]


def test_matrix_identity_and_symmetry(af_matrices):
    for dm in af_matrices.values():
        D = dm.values
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0.0)
        assert np.all(D[~np.eye(3, dtype=bool)] > 0)
        assert not dm.failed


def test_alikakos_fusco_classification(af_matrices):
    below = obstruction_report(af_matrices[0.3], 2e-4 * af_matrices[0.3].scale)
    above = obstruction_report(af_matrices[0.9], 2e-4 * af_matrices[0.9].scale)
    assert below.pair(0, 1).classification == DEGENERATE
    assert above.pair(0, 1).classification == STRICT


def test_alikakos_fusco_distances_match_closed_form(af_matrices):
    # Phi(z) = z^2/2 - i eps z - z^4/4 + i eps z^3/3 has |Phi'| = sqrt(W); straight images give d
    for eps, dm in af_matrices.items():
        def phi(z):
            return z**2 / 2 - 1j * eps * z - z**4 / 4 + 1j * eps * z**3 / 3

        wells = [-1.0, 1.0, 1j * eps]
        for j in range(3):
            for k in range(j + 1, 3):
                exact = abs(phi(wells[k]) - phi(wells[j]))
                if eps < 0.68125 and {j, k} == {0, 1}:
                    exact = abs(phi(wells[2]) - phi(wells[0])) + abs(phi(wells[1]) - phi(wells[2]))
                assert abs(dm.values[j, k] - exact) < 1e-4 * exact


def test_obstruction_split_agreement(af_matrices):
    dm = af_matrices[0.3]
    pot = make_alikakos_fusco(0.3)
    rep = obstruction_report(dm, 2e-4 * dm.scale)
    pair = rep.pair(0, 1)
    assert pair.classification == DEGENERATE
    split = split_at_wells(dm.result(0, 1), pot)
    assert pair.witness in split.wells[1:-1]


def test_classify_slacks():
    assert classify_slacks({}, 1e-3)[0] == STRICT
    assert classify_slacks({2: 0.5, 3: 0.2}, 1e-3)[0] == STRICT
    assert classify_slacks({2: 0.5, 3: 1e-4}, 1e-3)[0] == DEGENERATE
    cls, slack, witness = classify_slacks({2: -0.1, 3: 1e-4}, 1e-3)
    assert (cls, slack, witness) == (VIOLATED, -0.1, 2)


def test_report_from_plain_array():
    D = np.array([[0, 1, 2, 2.5], [1, 0, 1, 1], [2, 1, 0, 1], [2.5, 1, 1, 0]], dtype=float)
    rep = obstruction_report(D, 1e-9)
    assert rep.pair(0, 1).classification == STRICT
    assert rep.pair(0, 3).classification == VIOLATED
    assert rep.pair(0, 2).classification == DEGENERATE
    doc = rep.to_dict()
    assert len(doc["pairs"]) == 6


def test_report_rejects_bad_tol():
    with pytest.raises(ArgumentError):
        obstruction_report(np.zeros((2, 2)), 0.0)


def test_violated_pair_is_resolved():
    # from the straight start alone p1 -> p2 stays on the x-axis (E ~ 0.98); the route
    # through p3 is shorter, so the pair comes out VIOLATED and is re-solved from it
    pot = make_six_well()
    dm = distance_matrix(pot, SolveOptions(node_count=64, n_random_restarts=0))
    assert (0, 1) in dm.resolved
    assert dm.values[0, 1] < 0.75
    rep = obstruction_report(dm, 2e-2 * dm.scale)
    assert all(p.classification != VIOLATED for p in rep.pairs)


def test_split_double_well(dw_geodesic, double_well):
    s = split_at_wells(dw_geodesic, double_well)
    assert s.J == 2 and len(s.arcs) == 1
    assert s.times == [0.0, 1.0]
    assert abs(s.energy_gap) <= 1e-6 * dw_geodesic.energy


def test_split_alikakos_fusco_below_threshold(af_matrices):
    pot = make_alikakos_fusco(0.3)
    gr = af_matrices[0.3].result(0, 1)
    s = split_at_wells(gr, pot)
    assert s.J == 3
    assert s.wells == [0, 2, 1]
    assert np.array_equal(s.arcs[0].nodes[-1], [0.0, 0.3])
    assert np.array_equal(s.arcs[1].nodes[0], [0.0, 0.3])
    assert abs(s.energy_gap) <= 1e-6 * gr.energy
    assert 0 < s.times[1] < 1


def test_split_six_well_axis():
    pot = make_six_well()
    c = DiscreteCurve.segment([-1, 0, 0], [1, 0, 0], 64)
    s = split_at_wells(c, pot)
    assert s.J == 2


def test_split_raises_when_neighbourhoods_overlap():
    pot = from_expression("((x-1)^2+y^2)*((x+1)^2+y^2)*(x^2+(y-0.01)^2)*(x^2+(y+0.01)^2)", 2,
                          [[-1, 0], [1, 0], [0, 0.01], [0, -0.01]])
    c = DiscreteCurve.segment([-1, 0], [1, 0], 20)
    with pytest.raises(GeometryError):
        split_at_wells(c, pot, well_radius=0.05)


def test_split_raises_on_reentry():
    pot = make_alikakos_fusco(0.3)
    X = np.array([[-1, 0], [-0.5, 0.4], [0, 0.3], [0.2, 0.5], [0.4, 0.6], [0.1, 0.45], [0, 0.3], [1, 0]], dtype=float)
    with pytest.raises(GeometryError):
        split_at_wells(DiscreteCurve(X), pot, well_radius=0.01)


def test_default_well_radius():
    assert default_well_radius(make_double_well()) == pytest.approx(2e-3)


def test_split_consistency_on_polyline_through_a_well():
    pot = make_alikakos_fusco(0.3)
    X = np.array([[-1, 0], [-0.5, 0.2], [0, 0.3], [0.5, 0.2], [1, 0]], dtype=float)
    c = DiscreteCurve(X)
    s = split_at_wells(c, pot)
    total = weighted_length(c, pot)
    assert s.J == 3
    assert math.fsum(weighted_length(a, pot) for a in s.arcs) == pytest.approx(total, rel=1e-6)


def test_sweep_without_transition():
    res = sweep_epsilon(0.8, 0.9)
    assert res.estimate is None
    assert "no transition" in res.message
    assert len(res.points) == 2


def test_sweep_single_point():
    res = sweep_epsilon(0.5, 0.5)
    assert res.estimate is None and len(res.points) == 1
    assert res.points[0].classification == DEGENERATE


def test_sweep_rejects_bad_range():
    with pytest.raises(ArgumentError):
        sweep_epsilon(0.9, 0.3)


def test_classify_near_threshold_sides():
    assert classify_alikakos_fusco(0.66).classification == DEGENERATE
    assert classify_alikakos_fusco(0.70).classification == STRICT
