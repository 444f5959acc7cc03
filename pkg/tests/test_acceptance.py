"""Acceptance suite: one PASS/FAIL line per criterion, collected in the terminal summary."""
import json
import math
import time

import numpy as np
import pytest

from wellgeo.cli import main
from wellgeo.curve import DiscreteCurve, weighted_length
from wellgeo.expr import evaluate, parse_expression, value_and_gradient
from wellgeo.geodesic import SolveOptions, discrete_E_gradient, length_by_partitions, minimize_E
from wellgeo.heteroclinic import (
    HeteroclinicProfile,
    connect,
    equipartition_reparametrize,
    evaluate_profile,
    hamiltonian_action,
    profile_weighted_length,
)
from wellgeo.metric import distance, distance_matrix
from wellgeo.oracle import GridSpec, grid_distance
from wellgeo.potential import (
    make_alikakos_fusco,
    make_double_well,
    make_oscillatory,
    make_six_well,
)

from conftest import SIX_WELL_TEXT, all_builtins, random_points_away_from_wells, record

SQRT2 = math.sqrt(2.0)
EPS_STAR = math.sqrt(2 * math.sqrt(3) - 3)


def gamma_pp(mu, eps=0.96):
    off = eps / SQRT2 * (1.0 - mu**2)
    return np.stack([mu, off, off], axis=1)


@pytest.fixture(scope="module")
def six_well_p1_p2():
    pot = make_six_well()
    t0 = time.perf_counter()
    r = minimize_E(pot, pot.wells[0].point, pot.wells[1].point, SolveOptions())
    return r, time.perf_counter() - t0


def test_eps_star_value():
    assert abs(EPS_STAR - 0.68125) < 1e-5


def test_criterion_1_six_well_straight_line():
    t0 = time.perf_counter()
    E = weighted_length(DiscreteCurve.segment([-1, 0, 0], [1, 0, 0], 4000), make_six_well())
    ok = record(1, 0.97 <= E <= 0.99, f"straight-line E = {E:.6f} in [0.97, 0.99]", time.perf_counter() - t0, 1.0)
    assert ok


def test_criterion_2_six_well_detour(six_well_p1_p2):
    pot = make_six_well()
    t0 = time.perf_counter()
    detour = weighted_length(DiscreteCurve(gamma_pp(np.linspace(-1, 1, 4001))), pot)
    straight = weighted_length(DiscreteCurve.segment([-1, 0, 0], [1, 0, 0], 4000), pot)
    r, solve_time = six_well_p1_p2
    elapsed = time.perf_counter() - t0 + solve_time
    ok = 0.73 <= detour <= 0.75 and r.energy <= 0.75 < straight
    ok = record(2, ok, f"detour E = {detour:.6f} in [0.73, 0.75]; minimize_E = {r.energy:.6f} <= 0.75 < {straight:.6f}",
                elapsed, 60.0)
    assert ok


def test_criterion_3_alikakos_fusco_threshold(capsys):
    t0 = time.perf_counter()
    code = main(["sweep-epsilon", "--lo", "0.3", "--hi", "0.9", "--tol", "0.02"])
    doc = json.loads(capsys.readouterr().out)
    est = doc["estimate"]
    ok = code == 0 and est is not None and abs(est - 0.68125) < 0.05
    with capsys.disabled():
        ok = record(3, ok, f"estimated eps* = {est} (|. - 0.68125| < 0.05)", time.perf_counter() - t0, 600.0)
    assert ok


def test_criterion_4_double_well_suite():
    pot = make_double_well()
    t0 = time.perf_counter()
    d, _ = distance(pot, 0, 1)
    conn = connect(pot, 0, 1, SolveOptions(node_count=512), n_samples=4000)
    prof = conn.profiles[0]
    inside = np.abs(prof.x) <= 5
    sup = float(np.max(np.abs(prof.U[inside, 0] - np.tanh(prof.x[inside] / SQRT2))))
    H = prof.action
    ok = abs(d - 2 / 3) < 2e-3 and sup < 5e-3 and abs(H - 2 * SQRT2 / 3) < 5e-3
    ok = record(4, ok, f"d = {d:.6f} (2/3 +- 2e-3); tanh sup error {sup:.2e} < 5e-3; H = {H:.6f} (2sqrt2/3 +- 5e-3)",
                time.perf_counter() - t0, 30.0)
    assert ok


def _fd_curve_gradient(X, pot, h=1e-7):
    g = np.zeros_like(X)
    for i in range(1, X.shape[0] - 1):
        for a in range(X.shape[1]):
            Y = X.copy()
            Y[i, a] += h
            up = weighted_length(DiscreteCurve(Y), pot)
            Y[i, a] -= 2 * h
            g[i, a] = (up - weighted_length(DiscreteCurve(Y), pot)) / (2 * h)
    return g


def _expression_forms(eps=0.5):
    af = (f"((1-x^2+y^2)*x+2*x*y*(y-{eps}))^2 + ((1-x^2+y^2)*(y-{eps})-2*x^2*y)^2")
    osc = ("(2+sin(1/sqrt((x+1)^2+y^2)))*((x+1)^2+y^2)"
           "*(2+sin(1/sqrt((x-1)^2+y^2)))*((x-1)^2+y^2)")
    return {
        "double_well": ("(1-x^2)^2/4+y^2/2", 2),
        "alikakos_fusco": (af, 2),
        "six_well": (SIX_WELL_TEXT, 3),
        "oscillatory": (osc, 2),
    }


def test_criterion_5a_gradient_checks():
    t0 = time.perf_counter()
    worst_curve = worst_expr = 0.0
    same_w = True
    rng = np.random.default_rng(5)
    for name, pot in all_builtins().items():
        for _ in range(20):
            p, q = random_points_away_from_wells(pot, 2, rng, min_dist=0.2)
            t = np.linspace(0, 1, 9)[:, None]
            X = (1 - t) * p + t * q + 0.2 * rng.normal(size=(9, pot.dimension)) * (t * (1 - t))
            g = discrete_E_gradient(DiscreteCurve(X), pot)[1:-1]
            fd = _fd_curve_gradient(X, pot)[1:-1]
            err = np.max(np.linalg.norm(g - fd, axis=1)) / (1 + np.max(np.linalg.norm(fd, axis=1)))
            worst_curve = max(worst_curve, err)
    for name, (text, dim) in _expression_forms().items():
        ast = parse_expression(text, dim)
        pts = random_points_away_from_wells(all_builtins()[name], 20, rng, min_dist=0.2)
        val, g = value_and_gradient(ast, pts)
        same_w &= bool(np.allclose(val, all_builtins()[name].value(pts), rtol=1e-12, atol=1e-14))
        h = 1e-6
        fd = np.stack([(evaluate(ast, pts + h * e) - evaluate(ast, pts - h * e)) / (2 * h) for e in np.eye(dim)], axis=1)
        err = np.max(np.linalg.norm(g - fd, axis=1) / (1 + np.linalg.norm(fd, axis=1)))
        worst_expr = max(worst_expr, err)
    ok = worst_curve < 1e-5 and worst_expr < 1e-5 and same_w
    ok = record("5a", ok, f"worst rel. error: discrete E gradient {worst_curve:.1e}, expression gradient "
                f"{worst_expr:.1e} (< 1e-5)", time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_5b_metric_axioms():
    t0 = time.perf_counter()
    cases = {
        "double_well": (make_double_well(), SolveOptions()),
        "alikakos_fusco(0.3)": (make_alikakos_fusco(0.3), SolveOptions()),
        "alikakos_fusco(0.9)": (make_alikakos_fusco(0.9), SolveOptions()),
        "six_well": (make_six_well(), SolveOptions(node_count=128)),
        "oscillatory": (make_oscillatory([-1.0, 0.0], [1.0, 0.0]), SolveOptions()),
    }
    ok = True
    worst = math.inf
    for name, (pot, opts) in cases.items():
        dm = distance_matrix(pot, opts)
        D = dm.values
        ok &= bool(np.array_equal(D, D.T)) and not np.any(np.diag(D)) and not dm.failed
        m = dm.m
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    if len({j, k, l}) == 3:
                        slack = (D[j, l] + D[l, k] - D[j, k]) / dm.scale
                        worst = min(worst, slack)
    ok = ok and worst >= -2e-2
    ok = record("5b", ok, f"symmetry and zero diagonal exact; worst triangle slack {worst:.2e}*scale >= -2e-2",
                time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_5c_action_bounds_energy():
    t0 = time.perf_counter()
    pot = make_double_well()
    rng = np.random.default_rng(11)
    exact = True
    for _ in range(50):
        x = np.unique(rng.uniform(-5, 5, 40))
        U = np.cumsum(rng.normal(scale=0.3, size=(x.size, 2)), axis=0)
        prof = HeteroclinicProfile(x, U)
        exact &= hamiltonian_action(prof, pot) >= SQRT2 * profile_weighted_length(prof, pot)
    gaps = []
    for pot, n in ((make_double_well(), 512), (make_alikakos_fusco(0.9), 512)):
        r = minimize_E(pot, pot.wells[0].point, pot.wells[1].point, SolveOptions(node_count=n))
        prof = evaluate_profile(equipartition_reparametrize(r.curve, pot, n_samples=4000), pot)
        gaps.append(abs(prof.action - SQRT2 * profile_weighted_length(prof, pot)) / prof.action)
    ok = bool(exact) and max(gaps) < 1e-2
    ok = record("5c", ok, f"H >= sqrt2*E on 50 random profiles: {bool(exact)}; saturation gaps "
                f"{', '.join(f'{g:.1e}' for g in gaps)} < 1e-2", time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_5d_length_equals_energy(dw_geodesic, double_well):
    t0 = time.perf_counter()
    E = dw_geodesic.energy
    parts = length_by_partitions(dw_geodesic.curve, double_well, [1, 2, 4, 8], SolveOptions(node_count=64))
    rel = [abs(p.value - E) / E for p in parts]
    ok = max(rel) < 2e-2 and all(p.converged for p in parts)
    ok = record("5d", ok, "partition sums within " + ", ".join(f"{r:.1e}" for r in rel) + " of E (< 2e-2)",
                time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_5e_oracle_equivalence():
    t0 = time.perf_counter()
    errs = {}
    for name, pot in (("double_well", make_double_well()), ("af 0.3", make_alikakos_fusco(0.3)),
                      ("af 0.9", make_alikakos_fusco(0.9))):
        d, _ = distance(pot, 0, 1)
        spec = GridSpec.around(pot.well_points, 600, margin=0.5, reach=2)
        g = grid_distance(pot, pot.wells[0].point, pot.wells[1].point, spec).cost
        errs[name] = abs(d - g) / d
    ok = max(errs.values()) < 3e-2
    ok = record("5e", ok, "solver vs 600^2 lattice (reach 2): " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
                + " (< 3e-2)", time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_5f_conformal_scaling():
    t0 = time.perf_counter()
    c = 2.0
    worst_entry = worst_node = 0.0
    for pot in (make_double_well(), make_alikakos_fusco(0.3), make_alikakos_fusco(0.9)):
        a = distance_matrix(pot)
        b = distance_matrix(pot.scaled(c * c))
        off = ~np.eye(a.m, dtype=bool)
        worst_entry = max(worst_entry, float(np.max(np.abs(b.values[off] - c * a.values[off]) / (c * a.values[off]))))
        for j in range(a.m):
            for k in range(j + 1, a.m):
                diff = np.max(np.abs(a.result(j, k).curve.nodes - b.result(j, k).curve.nodes))
                worst_node = max(worst_node, float(diff))
    ok = worst_entry < 1e-6 and worst_node < 1e-6
    ok = record("5f", ok, f"c = 2: entries x c within {worst_entry:.1e}, nodes within {worst_node:.1e} (< 1e-6)",
                time.perf_counter() - t0, 60.0)
    assert ok


def test_criterion_6_axis_orbit_is_not_minimal(six_well_p1_p2):
    pot = make_six_well()
    t0 = time.perf_counter()
    axis = DiscreteCurve.segment([-1, 0, 0], [1, 0, 0], 4000)
    prof = evaluate_profile(equipartition_reparametrize(axis, pot, n_samples=4000), pot)
    prof_3d = prof.U.shape[1] == 3 and not np.any(prof.U[:, 1:])
    res = prof.residuals["ode_residual"]
    r, _ = six_well_p1_p2
    bound = SQRT2 * r.energy
    ok = prof_3d and res < 1e-2 and prof.action > bound
    ok = record(6, ok, f"axis profile ode_residual {res:.1e} < 1e-2; H = {prof.action:.6f} > sqrt2*minimize_E = "
                f"{bound:.6f}", time.perf_counter() - t0)
    assert ok
