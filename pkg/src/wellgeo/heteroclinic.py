"""Heteroclinic profiles U(x) from well-to-well geodesic arcs.

A geodesic arc gamma of the metric sqrt(W)|dp| becomes a solution of
U'' = grad W(U) once it is traversed with speed |U'| = sqrt(2 W(U)), i.e.
with x(s) = int ds / sqrt(2 W(gamma(s))).  Along such a profile kinetic and
potential energy agree pointwise, and the action H equals sqrt(2) E(gamma).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .curve import DEGENERATE_W, DiscreteCurve, fmt
from .errors import ArgumentError, DegenerateInteriorError, WellgeoError
from .geodesic import SolveOptions
from .metric import DEGENERATE, OBSTRUCTION_RTOL, STRICT, classify_slacks, distance, split_at_wells
from .potential import Potential

ENDPOINT_W = 1e-14
_REFINE = 16


@dataclass
class HeteroclinicProfile:
    x: np.ndarray
    U: np.ndarray
    wells: tuple = (None, None)
    bounds: tuple = (math.nan, math.nan)
    action: float = math.nan
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        if self.x.ndim != 1 or self.U.shape[0] != self.x.shape[0]:
            raise ArgumentError("profile needs one U row per x sample")
        if self.x.size > 1 and not np.all(np.diff(self.x) > 0):
            raise ArgumentError("profile x-grid must be strictly increasing")

    @classmethod
    def constant(cls, point, x) -> "HeteroclinicProfile":
        x = np.asarray(x, dtype=float)
        return cls(x, np.tile(np.asarray(point, dtype=float), (len(x), 1)))

    @property
    def dimension(self) -> int:
        return self.U.shape[1]

    def shifted(self, dx: float) -> "HeteroclinicProfile":
        return HeteroclinicProfile(self.x + dx, self.U.copy(), self.wells, self.bounds)

    def derivative(self) -> np.ndarray:
        """U' by central differences, one-sided at the two ends."""
        x = self.x
        step = (x[-1] - x[0]) / (x.size - 1) if x.size > 1 else 1.0
        if x.size > 1 and np.max(np.abs(np.diff(x) - step)) <= 1e-8 * step:
            # scalar spacing keeps D(constant) exactly zero
            return np.gradient(self.U, step, axis=0, edge_order=1)
        return np.gradient(self.U, x, axis=0, edge_order=1)

    def to_csv(self, pot: Potential) -> str:
        W = pot.value(self.U)
        ekin = 0.5 * np.sum(self.derivative() ** 2, axis=1)
        buf = io.StringIO()
        buf.write(",".join(["x"] + [f"u{i + 1}" for i in range(self.dimension)] + ["W", "ekin"]) + "\n")
        for xi, row, wi, ki in zip(self.x, self.U, W, ekin):
            buf.write(",".join([fmt(xi)] + [fmt(v) for v in row] + [fmt(wi), fmt(ki)]) + "\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "wells": list(self.wells),
            "X_L": self.bounds[0],
            "X_R": self.bounds[1],
            "samples": int(self.x.size),
            "H": self.action,
            **self.residuals,
        }


# -- reparametrisation --------------------------------------------------------


def _leave_ball(X, cum, w, cutoff):
    """Arc length at which the polyline first leaves the ball |p - w| < cutoff."""
    for i in range(len(X) - 1):
        a, b = X[i], X[i + 1]
        if np.linalg.norm(b - w) >= cutoff:
            d = b - a
            rel = a - w
            A = d @ d
            B = 2.0 * (rel @ d)
            C = rel @ rel - cutoff * cutoff
            if C >= 0:
                return cum[i]
            u = (-B + math.sqrt(B * B - 4.0 * A * C)) / (2.0 * A)
            return cum[i] + u * (cum[i + 1] - cum[i])
    raise ArgumentError("arc never leaves the cutoff ball around its end well")


def _fine_grid(cum, s_lo, s_hi):
    """Quadrature nodes on [s_lo, s_hi]: every arc node plus refinement.

    The pieces touching the truncation points are graded geometrically
    towards the ends, where 1/sqrt(2W) grows like 1/distance.
    """
    inner = cum[(cum > s_lo) & (cum < s_hi)]
    breaks = np.concatenate([[s_lo], inner, [s_hi]])
    parts = []
    for k, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        if b <= a:
            continue
        graded = np.geomspace(1e-3, 1.0, 4 * _REFINE)
        first, last = k == 0, k == len(breaks) - 2
        if first and last:
            pts = np.concatenate([a + 0.5 * (b - a) * graded, b - 0.5 * (b - a) * graded[::-1]])
        elif first:
            pts = a + (b - a) * graded
        elif last:
            pts = b - (b - a) * graded[::-1]
        else:
            pts = np.linspace(a, b, _REFINE + 1)
        pts = np.concatenate([[a], pts, [b]])
        parts.append(pts[:-1])
    parts.append([s_hi])
    return np.unique(np.concatenate(parts))


def _polyline_at(X, cum, s):
    return np.stack([np.interp(s, cum, X[:, k]) for k in range(X.shape[1])], axis=1)


def equipartition_coordinate(arc: DiscreteCurve, pot: Potential, cutoff: float = 1e-3):
    """The map x(s) = int_{s_half}^{s} ds' / sqrt(2 W(gamma(s'))) on the truncated arc.

    Returns ``(X, cum, s, x)``: the deduplicated nodes, their cumulative
    arc length, quadrature nodes s in [s_lo, s_hi] (half the arc length
    among them) and x at those nodes, with x = 0 exactly at the half.
    """
    if arc.dimension != pot.dimension:
        raise ArgumentError("arc and potential dimensions differ")
    if not cutoff > 0:
        raise ArgumentError("cutoff must be positive")
    X = arc.nodes
    keep = np.concatenate([[True], np.linalg.norm(np.diff(X, axis=0), axis=1) > 0])
    X = X[keep]
    if len(X) < 2:
        raise ArgumentError("arc has zero length")
    Wend = pot.value(X[[0, -1]])
    if np.any(Wend > ENDPOINT_W):
        raise ArgumentError(f"arc endpoints must be wells (W = {Wend.tolist()})")
    if len(X) > 2:
        Wi = pot.value(X[1:-1])
        if np.min(Wi) < DEGENERATE_W:
            raise DegenerateInteriorError(
                "arc touches the zero set in its interior; split it at the wells first"
            )
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])
    total = cum[-1]
    s_lo = _leave_ball(X, cum, X[0], cutoff)
    s_hi = total - _leave_ball(X[::-1], total - cum[::-1], X[-1], cutoff)
    if not s_lo < total / 2 < s_hi:
        raise ArgumentError("cutoff too large for this arc")

    s = _fine_grid(cum, s_lo, s_hi)
    # the anchor replaces any grid point a rounding error away from it
    s = np.unique(np.concatenate([s[np.abs(s - total / 2) > 1e-9 * total], [total / 2]]))
    mid = 0.5 * (s[1:] + s[:-1])
    Wm = pot.value(_polyline_at(X, cum, mid))
    if np.min(Wm) < DEGENERATE_W:
        raise DegenerateInteriorError("arc touches the zero set in its interior")
    dx = np.diff(s) / np.sqrt(2.0 * Wm)
    x = np.concatenate([[0.0], np.cumsum(dx)])
    x -= x[int(np.searchsorted(s, total / 2))]
    if not np.all(np.diff(x) > 0):
        raise WellgeoError("cumulative x(s) is not increasing")

    return X, cum, s, x


def equipartition_reparametrize(
    arc: DiscreteCurve,
    pot: Potential,
    *,
    n_samples: int = 2000,
    samples_per_unit: float | None = None,
    cutoff: float = 1e-3,
) -> HeteroclinicProfile:
    """Profile U(x) = gamma(s(x)) on a uniform x-grid.

    x = 0 sits at half the Euclidean arc length.  The profile is truncated
    where the arc comes within ``cutoff`` of either end well.
    """
    X, cum, s, x = equipartition_coordinate(arc, pot, cutoff)
    X_L, X_R = -x[0], x[-1]
    if samples_per_unit is not None:
        n_samples = max(int(math.ceil(samples_per_unit * (X_L + X_R))), 5)
    grid = np.linspace(x[0], x[-1], int(n_samples))
    s_of_x = PchipInterpolator(x, s)(grid)
    # C2 interpolation through the arc nodes; a polyline would put a kink
    # (a spike in U'') at every node of a curved arc
    U = CubicSpline(cum, X, axis=0)(s_of_x) if len(X) > 3 else _polyline_at(X, cum, s_of_x)

    prof = HeteroclinicProfile(grid, U, bounds=(float(X_L), float(X_R)))
    prof.wells = (_well_at(pot, arc.nodes[0]), _well_at(pot, arc.nodes[-1]))
    prof.residuals = {
        "boundary_gap_left": float(np.linalg.norm(U[0] - arc.nodes[0])),
        "boundary_gap_right": float(np.linalg.norm(U[-1] - arc.nodes[-1])),
    }
    return prof


def _well_at(pot, point):
    for w in pot.wells:
        if np.array_equal(w.point, point):
            return w.index
    return None


# -- action and residuals ----------------------------------------------------


def trapezoid_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    h = np.diff(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def hamiltonian_action(prof: HeteroclinicProfile, pot: Potential) -> float:
    """H = int 1/2 |U'|^2 + W(U) dx by the trapezoid rule."""
    if prof.x.size < 3:
        raise ArgumentError("action needs at least 3 samples")
    dU = prof.derivative()
    dens = 0.5 * np.sum(dU**2, axis=1) + pot.value(prof.U)
    return float(np.dot(trapezoid_weights(prof.x), dens))


def profile_weighted_length(prof: HeteroclinicProfile, pot: Potential) -> float:
    """int sqrt(W(U)) |U'| dx with the same weights and derivative as the action."""
    dU = prof.derivative()
    dens = np.sqrt(np.maximum(pot.value(prof.U), 0.0)) * np.linalg.norm(dU, axis=1)
    return float(np.dot(trapezoid_weights(prof.x), dens))


def ode_residual(prof: HeteroclinicProfile, pot: Potential) -> float:
    """max |D^2 U - grad W(U)| over interior samples / (1 + max |grad W| on the profile)."""
    x = prof.x
    if x.size < 5:
        raise ArgumentError("ode residual needs at least 5 samples")
    dx = (x[-1] - x[0]) / (x.size - 1)
    if np.max(np.abs(np.diff(x) - dx)) > 1e-8 * dx:
        raise ArgumentError("ode residual needs a uniform x-grid")
    U = prof.U
    d2 = (U[2:] - 2.0 * U[1:-1] + U[:-2]) / (dx * dx)
    g = pot.gradient(U)
    res = np.linalg.norm(d2 - g[1:-1], axis=1)
    return float(np.max(res) / (1.0 + np.max(np.linalg.norm(g, axis=1))))


def equipartition_residual(prof: HeteroclinicProfile, pot: Potential) -> float:
    """max over samples of |1/2 |U'|^2 - W(U)| / (1 + W(U))."""
    if prof.x.size < 3:
        raise ArgumentError("equipartition residual needs at least 3 samples")
    kin = 0.5 * np.sum(prof.derivative() ** 2, axis=1)
    W = pot.value(prof.U)
    return float(np.max(np.abs(kin - W) / (1.0 + W)))


def integrated_equipartition_gap(prof: HeteroclinicProfile, pot: Potential) -> float:
    """|int 1/2 |U'|^2 - int W| / H."""
    w = trapezoid_weights(prof.x)
    kin = float(np.dot(w, 0.5 * np.sum(prof.derivative() ** 2, axis=1)))
    pot_part = float(np.dot(w, pot.value(prof.U)))
    H = kin + pot_part
    return abs(kin - pot_part) / H if H > 0 else 0.0


def evaluate_profile(prof: HeteroclinicProfile, pot: Potential) -> HeteroclinicProfile:
    """Fill in action and residuals."""
    prof.action = hamiltonian_action(prof, pot)
    prof.residuals.update(
        {
            "ode_residual": ode_residual(prof, pot),
            "equipartition_residual": equipartition_residual(prof, pot),
            "integrated_equipartition_gap": integrated_equipartition_gap(prof, pot),
        }
    )
    return prof


# -- end-to-end --------------------------------------------------------------


@dataclass
class Connection:
    profiles: list
    geodesic: object
    split: object
    obstructed: bool
    visited: list
    slacks: dict = field(default_factory=dict)
    classification: str = STRICT

    def to_dict(self) -> dict:
        return {
            "energy": self.geodesic.energy,
            "converged": self.geodesic.converged,
            "visited": self.visited,
            "passage_times": self.split.times,
            "obstructed": self.obstructed,
            "classification": self.classification,
            "slacks": {str(k): v for k, v in self.slacks.items()},
            "profiles": [p.summary() for p in self.profiles],
        }


def connect(
    pot: Potential,
    j,
    k,
    opts: SolveOptions | None = None,
    *,
    n_samples: int = 2000,
    samples_per_unit: float | None = None,
    cutoff: float = 1e-3,
    well_radius: float | None = None,
) -> Connection:
    """Geodesic p_j -> p_k, split at interior well passages, one profile per sub-arc.

    When the geodesic visits intermediate wells the pair is obstructed only
    if the distance slack through those wells also vanishes.
    """
    opts = opts or SolveOptions()
    _, gr = distance(pot, j, k, opts)
    split = split_at_wells(gr, pot, well_radius)
    profiles = []
    for arc in split.arcs:
        prof = equipartition_reparametrize(
            arc, pot, n_samples=n_samples, samples_per_unit=samples_per_unit, cutoff=cutoff
        )
        profiles.append(evaluate_profile(prof, pot))
    slacks = {}
    classification = STRICT
    if split.J > 2:
        jj, kk = pot.well_index(j), pot.well_index(k)
        for l in split.wells[1:-1]:
            d_jl, _ = distance(pot, jj, l, opts)
            d_lk, _ = distance(pot, l, kk, opts)
            slacks[l] = d_jl + d_lk - gr.energy
        tol = OBSTRUCTION_RTOL * max(gr.energy, *(s + gr.energy for s in slacks.values()))
        classification, _, _ = classify_slacks(slacks, tol)
    obstructed = split.J > 2 and classification == DEGENERATE
    return Connection(profiles, gr, split, obstructed, split.wells, slacks, classification)
