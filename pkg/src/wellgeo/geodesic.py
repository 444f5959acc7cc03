"""Minimising geodesics of the degenerate metric sqrt(W)|dp| between fixed endpoints.

The solver is a string method: preconditioned gradient descent on the
interior nodes of a polyline, with the tangential component of each step
projected out and the nodes re-spread at equal Euclidean arc length after
every ``redistribution_period`` accepted steps.

The preconditioner is the block tridiagonal matrix

    A = sum_i  (F(m_i) / |s_i|) * (graph Laplacian of segment i)  (x) I_N
        + block-diag( |s_i| / 4 * [Hess F(m_i)]_+ )

i.e. the segment stiffness of the discrete functional plus the positive
part of the curvature of F at the midpoints.  Without the second term the
step collapses wherever F is small but strongly curved across the path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _accel
from .curve import (
    DEGENERATE_W,
    DiscreteCurve,
    WellProximity,
    euclidean_length,
    min_distance_to_wells,
    resample_uniform_arclength,
    weighted_length,
)
from .errors import ArgumentError, DegenerateInteriorError, SolverError
from .potential import Potential


@dataclass(frozen=True)
class SolveOptions:
    node_count: int = 256
    max_iterations: int = 50000
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    redistribution_period: int = 1
    tolerance: float = 1e-8
    n_random_restarts: int = 4
    seed: int = 0
    initial_paths: tuple = ()
    include_straight: bool = True
    bump_scale: float = 0.5
    el_threshold: float = 5e-2
    min_step: float = 1e-14
    hessian_period: int = 3
    prune_window: int = 500
    prune_factor: float = 100.0

    def __post_init__(self):
        if self.node_count < 8:
            raise ArgumentError("node_count must be >= 8")
        for name in ("initial_step", "armijo", "tolerance", "el_threshold", "min_step"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if not 0 < self.shrink < 1:
            raise ArgumentError("shrink must lie in (0, 1)")
        if self.max_iterations < 0 or self.redistribution_period < 1 or self.hessian_period < 1:
            raise ArgumentError("max_iterations >= 0, redistribution_period >= 1 and hessian_period >= 1 required")
        if self.n_random_restarts < 0:
            raise ArgumentError("n_random_restarts must be >= 0")
        if self.prune_window < 1 or not self.prune_factor > 0:
            raise ArgumentError("prune_window >= 1 and prune_factor > 0 required")

    def with_(self, **changes) -> "SolveOptions":
        return replace(self, **changes)


@dataclass
class Candidate:
    restart_index: int
    energy: float
    converged: bool
    iterations: int
    error: str | None = None


@dataclass
class GeodesicResult:
    curve: DiscreteCurve
    energy: float
    iterations: int
    converged: bool
    el_residual: float
    well_proximity: list[WellProximity]
    restart_index: int
    projected_gradient: float = math.nan
    candidates: list[Candidate] = field(default_factory=list)
    step_energies: np.ndarray | None = None

    def to_dict(self, include_curve: bool = True) -> dict:
        doc = {
            "energy": self.energy,
            "converged": self.converged,
            "iterations": self.iterations,
            "el_residual": self.el_residual,
            "projected_gradient": self.projected_gradient,
            "restart_index": self.restart_index,
            "well_proximity": [w.to_dict() for w in self.well_proximity],
            "candidates": [
                {
                    "restart_index": c.restart_index,
                    "energy": c.energy,
                    "converged": c.converged,
                    "iterations": c.iterations,
                    "error": c.error,
                }
                for c in self.candidates
            ],
        }
        if include_curve:
            doc["curve"] = self.curve.nodes.tolist()
        return doc


# -- discrete functional -----------------------------------------------------


def _midpoint_terms(X, pot, guard=True):
    s = np.diff(X, axis=0)
    L = np.linalg.norm(s, axis=1)
    m = 0.5 * (X[1:] + X[:-1])
    W = pot.value(m)
    if guard and np.any(W < DEGENERATE_W):
        i = int(np.argmin(W))
        raise DegenerateInteriorError(
            f"W = {W[i]:.3e} < {DEGENERATE_W} at the midpoint of segment {i}"
        )
    return s, L, m, W


def _gradient_from_terms(s, L, m, W, pot):
    F = np.sqrt(W)
    gF = pot.gradient(m) / (2.0 * F)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        sh = np.where(L[:, None] > 0, s / np.where(L > 0, L, 1.0)[:, None], 0.0)
    half = 0.5 * gF * L[:, None]
    g = np.zeros((len(L) + 1, s.shape[1]))
    g[:-1] += half - F[:, None] * sh
    g[1:] += half + F[:, None] * sh
    return g, F, gF


def discrete_E_gradient(c: DiscreteCurve, pot: Potential) -> np.ndarray:
    """Exact gradient of the midpoint-rule E with respect to every node.

    Returns an ``(n+1, N)`` array; the endpoint rows are zero when the curve
    has fixed endpoints.
    """
    if c.dimension != pot.dimension:
        raise ArgumentError("curve and potential dimensions differ")
    s, L, m, W = _midpoint_terms(c.nodes, pot)
    g, _, _ = _gradient_from_terms(s, L, m, W, pot)
    if c.fixed_endpoints:
        g[0] = 0.0
        g[-1] = 0.0
    return g


def _hessian_F_positive(m, W, pot):
    """PSD part of Hess F at the midpoints, by central differences of grad W."""
    k, N = m.shape
    F = np.sqrt(W)
    h = 1e-6 * np.maximum(1.0, np.linalg.norm(m, axis=1))
    HW = np.empty((k, N, N))
    for a in range(N):
        e = np.zeros((k, N))
        e[:, a] = h
        HW[:, :, a] = (pot.gradient(m + e) - pot.gradient(m - e)) / (2.0 * h)[:, None]
    HW = 0.5 * (HW + HW.transpose(0, 2, 1))
    gW = pot.gradient(m)
    HF = HW / (2.0 * F)[:, None, None] - np.einsum("ki,kj->kij", gW, gW) / (4.0 * F**3)[:, None, None]
    lam, V = np.linalg.eigh(HF)
    lam = np.maximum(lam, 0.0)
    return np.einsum("kia,ka,kja->kij", V, lam, V)


def _tangents(X):
    t = X[2:] - X[:-2]
    n = np.linalg.norm(t, axis=1)
    n[n == 0] = 1.0
    return t / n[:, None]


def _project(v, T):
    return v - np.sum(v * T, axis=1)[:, None] * T


# -- solver ------------------------------------------------------------------


def _initial_paths(p, q, opts):
    n = opts.node_count
    paths = []
    for path in opts.initial_paths:
        arr = np.asarray(path.nodes if isinstance(path, DiscreteCurve) else path, dtype=float)
        paths.append(arr)
    if opts.include_straight:
        paths.append(DiscreteCurve.segment(p, q, n).nodes)
    if opts.n_random_restarts:
        rng = np.random.default_rng(opts.seed)
        N = p.shape[0]
        axis = (q - p) / np.linalg.norm(q - p)
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        base = (1.0 - t) * p + t * q
        span = np.linalg.norm(q - p)
        for _ in range(opts.n_random_restarts):
            if N == 1:
                break
            v = rng.standard_normal((2, N))
            v = v - (v @ axis)[:, None] * axis
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            a1 = rng.uniform(0.1, opts.bump_scale) * span
            a2 = rng.uniform(-0.5, 0.5) * a1
            path = base + a1 * np.sin(np.pi * t) * v[0] + a2 * np.sin(2.0 * np.pi * t) * v[1]
            path[0], path[-1] = p, q
            paths.append(path)
    return paths


def _hopeless(trace, it, opts, gap):
    """True if the recent decrease of E, extrapolated, cannot close ``gap``.

    The per-window decrease is assumed to keep shrinking geometrically at
    the ratio of the last two windows (linear extrapolation over the
    remaining iteration budget if it is not shrinking).
    """
    win = opts.prune_window
    rate = trace[it - win][0] - trace[it - 1][1]
    if it < 2 * win:
        return gap > opts.prune_factor * rate
    prev = trace[it - 2 * win][0] - trace[it - win - 1][1]
    if prev > 0 and 0 <= rate < prev:
        rho = rate / prev
        reach = rate * rho / (1.0 - rho)
    else:
        reach = rate * (opts.max_iterations - it) / win
    return gap > reach


def _interior_wells(X, pot):
    ends = X[[0, -1]]
    return [w for w in pot.well_points if np.min(np.linalg.norm(ends - w, axis=1)) > 1e-12]


def _update_pins(X, wells, pins):
    """Snap a node onto every well the string passes within a quarter segment of.

    F vanishes like a cone at a nondegenerate well, so a free node next to
    it never settles; a node sitting on the well keeps E smooth in the rest.
    """
    n = X.shape[0] - 1
    a = X[:-1]
    seg = np.diff(X, axis=0)
    L2 = np.maximum(np.einsum("ij,ij->i", seg, seg), 1e-300)
    for w in wells:
        if any(np.array_equal(X[i], w) for i in pins):
            continue
        t = np.clip(np.einsum("ij,ij->i", w - a, seg) / L2, 0.0, 1.0)
        dist = np.linalg.norm(a + t[:, None] * seg - w, axis=1)
        k = int(np.argmin(dist))
        if dist[k] >= 0.25 * math.sqrt(L2[k]):
            continue
        i = k if t[k] < 0.5 else k + 1
        if 0 < i < n and i not in pins:
            X[i] = w
            pins.add(i)


def _split_counts(lengths, n):
    """Distribute n segments over pieces in proportion to their lengths, at least one each."""
    lengths = np.asarray(lengths, dtype=float)
    total = lengths.sum()
    share = n * lengths / total if total > 0 else np.full(len(lengths), n / len(lengths))
    counts = np.maximum(np.floor(share).astype(int), 1)
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    k = 0
    while counts.sum() < n:
        counts[order[k % len(order)]] += 1
        k += 1
    while counts.sum() > n:
        j = int(np.argmax(counts))
        counts[j] -= 1
    return counts


def _redistribute(X, pins):
    """Uniform arc-length spacing, piecewise between pinned nodes."""
    n = X.shape[0] - 1
    if not pins:
        return resample_uniform_arclength(DiscreteCurve(X), n).nodes, pins
    cuts = [0, *sorted(pins), n]
    pieces = [X[a:b + 1] for a, b in zip(cuts[:-1], cuts[1:])]
    counts = _split_counts([euclidean_length(DiscreteCurve(P)) for P in pieces], n)
    out = [X[:1]]
    for P, c in zip(pieces, counts):
        R = resample_uniform_arclength(DiscreteCurve(P), int(c)).nodes if c >= 2 else P[[0, -1]]
        R[-1] = P[-1]
        out.append(R[1:])
    return np.concatenate(out), set(np.cumsum(counts)[:-1].tolist())


def _descend(X, pot, opts, benchmark=math.inf):
    """Run the string-method iteration from nodes X. Returns (X, iters, converged, pg, trace)."""
    n = X.shape[0] - 1
    X = X.copy()
    wells = _interior_wells(X, pot)
    pins = set()
    _update_pins(X, wells, pins)
    trace = []
    step = opts.initial_step
    it = 0
    since_redistribution = 0
    pg = math.inf
    while True:
        s, L, m, W = _midpoint_terms(X, pot)
        g, F, _ = _gradient_from_terms(s, L, m, W, pot)
        if not np.all(np.isfinite(g)):
            raise SolverError(f"non-finite gradient at iteration {it}")
        E = math.fsum(F * L)
        gi = g[1:-1]
        T = _tangents(X)
        Pg = _project(gi, T)
        frozen = np.array(sorted(pins), dtype=int) - 1
        Pg[frozen] = 0.0
        pg = float(np.max(np.linalg.norm(Pg, axis=1))) if len(Pg) else 0.0
        if pg < opts.tolerance * (1.0 + E):
            return X, it, True, pg, trace
        if it >= opts.max_iterations:
            return X, it, False, pg, trace
        if it and it % opts.prune_window == 0 and E - benchmark > 1e-9 * (1.0 + E):
            if _hopeless(trace, it, opts, E - benchmark):
                return X, it, False, pg, trace

        w = F / L
        if it % opts.hessian_period == 0:
            HF = _hessian_F_positive(m, W, pot)
        Hp = HF * (0.25 * L)[:, None, None]
        N = X.shape[1]
        diag = (w[:-1] + w[1:])[:, None, None] * np.eye(N) + Hp[:-1] + Hp[1:]
        off = w[1:-1].copy()
        for i in pins:
            off[max(i - 2, 0):i] = 0.0
        d = -_accel.block_tridiag_solve(diag, off, Pg)
        d = _project(d, T)
        d[frozen] = 0.0
        slope = float(np.sum(gi * d))
        if not np.isfinite(slope):
            raise SolverError(f"non-finite search direction at iteration {it}")

        a = min(opts.initial_step, 2.0 * step)
        accepted = False
        while a >= opts.min_step:
            Y = X.copy()
            Y[1:-1] += a * d
            mY = 0.5 * (Y[1:] + Y[:-1])
            WY = pot.value(mY)
            if np.all(WY >= DEGENERATE_W):
                EY = math.fsum(np.sqrt(WY) * np.linalg.norm(np.diff(Y, axis=0), axis=1))
                if EY <= E + opts.armijo * a * slope:
                    accepted = True
                    break
            a *= opts.shrink
        if not accepted:
            return X, it, False, pg, trace
        trace.append((E, EY))
        step = a
        X = Y
        it += 1
        since_redistribution += 1
        if since_redistribution >= opts.redistribution_period:
            X, pins = _redistribute(X, pins)
            _update_pins(X, wells, pins)
            since_redistribution = 0


def minimize_E(pot: Potential, p, q, opts: SolveOptions | None = None) -> GeodesicResult:
    """Best polyline from p to q over all restarts (lowest restart index wins ties)."""
    opts = opts or SolveOptions()
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (pot.dimension,) or q.shape != (pot.dimension,):
        raise ArgumentError("endpoints must be N-vectors matching the potential")
    if np.array_equal(p, q):
        raise ArgumentError("endpoints coincide (p == q)")
    n = opts.node_count
    best = None
    candidates = []
    for idx, path in enumerate(_initial_paths(p, q, opts)):
        X0 = resample_uniform_arclength(DiscreteCurve(path), n).nodes
        X0[0], X0[-1] = p, q
        try:
            X, iters, conv, pg, trace = _descend(X0, pot, opts, best[1] if best else math.inf)
        except DegenerateInteriorError as exc:
            candidates.append(Candidate(idx, math.nan, False, 0, str(exc)))
            continue
        curve = DiscreteCurve(X)
        E = weighted_length(curve, pot)
        candidates.append(Candidate(idx, E, conv, iters))
        if best is None or E < best[1]:
            best = (curve, E, iters, conv, pg, idx, trace)
    if best is None:
        raise SolverError("every initial path touches the zero set of W in its interior")
    curve, E, iters, conv, pg, idx, trace = best
    el = geodesic_el_residual(curve, pot)
    converged = conv and el < opts.el_threshold
    return GeodesicResult(
        curve=curve,
        energy=E,
        iterations=iters,
        converged=converged,
        el_residual=el,
        well_proximity=min_distance_to_wells(curve, pot),
        restart_index=idx,
        projected_gradient=pg,
        candidates=candidates,
        step_energies=np.array(trace) if trace else np.zeros((0, 2)),
    )


# -- Euler-Lagrange residual -------------------------------------------------


def el_residual(c: DiscreteCurve, pot: Potential, exclude_radius: float = 0.0, wells=None) -> float:
    """Normalised residual of d/ds(F dgamma/ds) = l^2 grad F at constant speed.

    Nodes closer than ``exclude_radius`` to one of ``wells`` (default: all
    wells of the potential) are left out; F is not differentiable there.
    """
    if c.nodes.shape[0] < 5:
        raise ArgumentError("el_residual needs at least 5 nodes")
    n = c.n_segments
    X = resample_uniform_arclength(c, n).nodes
    l = euclidean_length(DiscreteCurve(X))
    if l == 0:
        return 0.0
    ds = 1.0 / n
    s, L, m, W = _midpoint_terms(X, pot, guard=False)
    Fm = np.sqrt(np.maximum(W, 0.0))
    flux = Fm[:, None] * s / ds
    div = (flux[1:] - flux[:-1]) / ds
    xi = X[1:-1]
    keep = np.ones(len(xi), dtype=bool)
    centres = pot.well_points if wells is None else np.atleast_2d(np.asarray(wells, dtype=float))
    if exclude_radius > 0 and len(centres):
        dist = np.linalg.norm(xi[:, None, :] - centres[None, :, :], axis=2).min(axis=1)
        keep &= dist >= exclude_radius
    if not np.any(keep):
        return 0.0
    Wi = pot.value(xi[keep])
    if np.any(Wi < DEGENERATE_W):
        raise DegenerateInteriorError("curve touches the zero set at an interior node")
    gradF = pot.gradient(xi[keep]) / (2.0 * np.sqrt(Wi))[:, None]
    res = np.linalg.norm(div[keep] - l * l * gradF, axis=1)
    scale = 1.0 + l * l * float(np.max(np.linalg.norm(gradF, axis=1)))
    return float(np.max(res) / scale)


def geodesic_el_residual(curve: DiscreteCurve, pot: Potential) -> float:
    """EL residual with nodes near interior well passages excluded.

    When grad W does not extend continuously to the wells, grad F oscillates
    ever faster towards the endpoint wells and no node spacing resolves it,
    so nodes within a tenth of the curve length of those wells are skipped too.
    """
    l = euclidean_length(curve)
    h = l / curve.n_segments
    ends = curve.nodes[[0, -1]]
    at_end = [np.any(np.all(w == ends, axis=1)) for w in pot.well_points]
    wells = [
        w for w, end in zip(pot.well_points, at_end)
        if not end and np.min(np.linalg.norm(curve.nodes - w, axis=1)) < 2.0 * h
    ]
    radius = 2.0 * h
    if not pot.smooth_at_wells:
        wells += [w for w, end in zip(pot.well_points, at_end) if end]
        radius = max(radius, 0.1 * l)
    if not wells:
        return el_residual(curve, pot)
    return el_residual(curve, pot, exclude_radius=radius, wells=np.array(wells))


# -- avoidance radius --------------------------------------------------------


@dataclass(frozen=True)
class AvoidanceRadius:
    M_eps: float
    m_eps: float
    r_eps: float


def avoidance_radius(pot: Potential, eps: float, n_samples: int = 100_000, seed: int = 0) -> AvoidanceRadius:
    """Sampled max of F on |p| <= 1/eps, min of F on the annuli eps <= |p - p_j| <= 2 eps,
    and r_eps = eps * m_eps / M_eps.

    Segments shorter than r_eps admit E-minimisers that stay outside the
    eps-neighbourhoods of the wells.
    """
    if not eps > 0:
        raise ArgumentError("eps must be positive")
    R = 1.0 / eps
    pts = pot.well_points
    if len(pts) and np.max(np.linalg.norm(pts, axis=1)) >= R:
        raise ArgumentError(f"eps = {eps} too large: a well lies outside the ball of radius 1/eps")
    rng = np.random.default_rng(seed)
    N = pot.dimension
    dirs = rng.standard_normal((n_samples, N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ball = dirs * (R * rng.uniform(0.0, 1.0, n_samples) ** (1.0 / N))[:, None]
    M = float(np.max(np.sqrt(np.maximum(pot.value(ball), 0.0))))
    per = max(n_samples // max(len(pts), 1), 1)
    m_vals = []
    for w in pts:
        u = rng.uniform(0.0, 1.0, per)
        radii = (eps**N + u * ((2 * eps) ** N - eps**N)) ** (1.0 / N)
        d = rng.standard_normal((per, N))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        m_vals.append(np.min(np.sqrt(np.maximum(pot.value(w + radii[:, None] * d), 0.0))))
    m = float(min(m_vals)) if m_vals else math.nan
    return AvoidanceRadius(M, m, eps * m / M)


# -- length by partitions ----------------------------------------------------


@dataclass(frozen=True)
class PartitionSum:
    size: int
    value: float
    converged: bool


def points_at_arclength(c: DiscreteCurve, fractions) -> np.ndarray:
    t = c.arclength_parameter()
    fr = np.asarray(fractions, dtype=float)
    out = np.stack([np.interp(fr, t, c.nodes[:, k]) for k in range(c.dimension)], axis=1)
    out[fr == 0.0] = c.nodes[0]
    out[fr == 1.0] = c.nodes[-1]
    return out


def length_by_partitions(c: DiscreteCurve, pot: Potential, partition_sizes, opts: SolveOptions | None = None):
    """For each J: sum of d(c(t_j), c(t_{j+1})) over J equal arc-length pieces."""
    opts = opts or SolveOptions()
    cache = {}
    out = []
    for J in partition_sizes:
        J = int(J)
        if J < 1:
            raise ArgumentError("partition sizes must be >= 1")
        pts = points_at_arclength(c, np.linspace(0.0, 1.0, J + 1))
        terms = []
        conv = True
        for a, b in zip(pts[:-1], pts[1:]):
            key = (a.tobytes(), b.tobytes())
            if key not in cache:
                cache[key] = minimize_E(pot, a, b, opts)
            r = cache[key]
            terms.append(r.energy)
            conv &= r.converged
        out.append(PartitionSum(J, math.fsum(terms), conv))
    return out
