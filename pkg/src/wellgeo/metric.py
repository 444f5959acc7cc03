"""Well-to-well distances, intermediate-well obstructions and splitting at well passages."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curve import DiscreteCurve, weighted_length
from .errors import ArgumentError, GeometryError, SolverError
from .geodesic import GeodesicResult, SolveOptions, minimize_E
from .potential import Potential, make_alikakos_fusco

STRICT = "STRICT"
DEGENERATE = "DEGENERATE"
VIOLATED = "VIOLATED"

# default obstruction tolerance relative to the largest matrix entry
OBSTRUCTION_RTOL = 2e-4


def distance(pot: Potential, j, k, opts: SolveOptions | None = None):
    """d(p_j, p_k) and the geodesic that achieves it."""
    j, k = pot.well_index(j), pot.well_index(k)
    if j == k:
        raise ArgumentError("distance needs two different wells")
    res = minimize_E(pot, pot.wells[j].point, pot.wells[k].point, opts)
    return res.energy, res


@dataclass
class DistanceMatrix:
    values: np.ndarray
    results: dict
    options: SolveOptions
    labels: list
    failed: list = field(default_factory=list)
    resolved: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def scale(self) -> float:
        return float(np.nanmax(self.values)) if self.m else 0.0

    def result(self, j: int, k: int) -> GeodesicResult:
        """Geodesic for the pair, oriented from p_j to p_k."""
        if j < k:
            return self.results[(j, k)]
        r = self.results[(k, j)]
        return GeodesicResult(
            r.curve.reversed(), r.energy, r.iterations, r.converged, r.el_residual,
            r.well_proximity, r.restart_index, r.projected_gradient, r.candidates, r.step_energies,
        )

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "matrix": self.values.tolist(),
            "pairs": [
                {
                    "j": j,
                    "k": k,
                    "d": r.energy,
                    "converged": r.converged,
                    "iterations": r.iterations,
                    "el_residual": r.el_residual,
                    "restart_index": r.restart_index,
                }
                for (j, k), r in sorted(self.results.items())
            ],
            "failed": [list(p) for p in self.failed],
            "resolved": [list(p) for p in self.resolved],
        }


def default_tolerance(dm: DistanceMatrix) -> float:
    return OBSTRUCTION_RTOL * max(dm.scale, 1e-300)


def _assemble(m, results):
    D = np.full((m, m), math.nan)
    np.fill_diagonal(D, 0.0)
    for (j, k), r in results.items():
        D[j, k] = D[k, j] = r.energy
    return D


def _concatenate(first: DiscreteCurve, second: DiscreteCurve) -> np.ndarray:
    return np.vstack([first.nodes, second.nodes[1:]])


def distance_matrix(pot: Potential, opts: SolveOptions | None = None, tol: float | None = None) -> DistanceMatrix:
    """All pairwise d(p_j, p_k), each unordered pair solved once.

    Pairs that come out VIOLATED (a detour through another well is shorter
    than the direct solve) are re-solved once, seeded with that detour.
    """
    opts = opts or SolveOptions()
    m = pot.m
    if m < 2:
        raise ArgumentError("distance matrix needs at least two wells")
    results = {}
    failed = []
    for j in range(m):
        for k in range(j + 1, m):
            try:
                results[(j, k)] = distance(pot, j, k, opts)[1]
            except SolverError:
                failed.append((j, k))
                continue
            if not results[(j, k)].converged:
                failed.append((j, k))
    labels = [w.label for w in pot.wells]
    dm = DistanceMatrix(_assemble(m, results), results, opts, labels, failed)

    report = obstruction_report(dm, tol if tol is not None else default_tolerance(dm))
    redo = [
        (p.j, p.k, p.witness) for p in report.pairs
        if p.classification == VIOLATED and (p.j, p.k) in results
    ]
    for j, k, l in redo:
        seed = _concatenate(dm.result(j, l).curve, dm.result(l, k).curve)
        again = minimize_E(
            pot, pot.wells[j].point, pot.wells[k].point,
            opts.with_(initial_paths=(seed,), include_straight=False, n_random_restarts=0),
        )
        if again.energy < results[(j, k)].energy:
            results[(j, k)] = again
        dm.resolved.append((j, k))
    dm.values = _assemble(m, results)
    return dm


# -- obstruction -------------------------------------------------------------


@dataclass(frozen=True)
class PairReport:
    j: int
    k: int
    classification: str
    min_slack: float
    witness: int | None
    slacks: dict


@dataclass
class ObstructionReport:
    pairs: list
    tol: float

    def classification(self, j: int, k: int) -> str:
        j, k = min(j, k), max(j, k)
        for p in self.pairs:
            if p.j == j and p.k == k:
                return p.classification
        raise ArgumentError(f"no pair ({j}, {k}) in report")

    def pair(self, j: int, k: int) -> PairReport:
        j, k = min(j, k), max(j, k)
        return next(p for p in self.pairs if p.j == j and p.k == k)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "pairs": [
                {
                    "j": p.j,
                    "k": p.k,
                    "classification": p.classification,
                    "min_slack": p.min_slack,
                    "witness": p.witness,
                }
                for p in self.pairs
            ],
        }


def classify_slacks(slacks: dict, tol: float):
    """Classification, minimal slack and witness well from {l: slack}."""
    if not slacks:
        return STRICT, math.inf, None
    witness = min(slacks, key=lambda l: (slacks[l], l))
    s = slacks[witness]
    if s < -tol:
        return VIOLATED, s, witness
    if abs(s) <= tol:
        return DEGENERATE, s, witness
    return STRICT, s, witness


def obstruction_report(dm, tol: float) -> ObstructionReport:
    """Classify each pair by the slack d_jl + d_lk - d_jk over intermediate wells l."""
    if not tol > 0:
        raise ArgumentError("tol must be positive")
    D = dm.values if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    m = D.shape[0]
    pairs = []
    for j in range(m):
        for k in range(j + 1, m):
            slacks = {l: D[j, l] + D[l, k] - D[j, k] for l in range(m) if l not in (j, k)}
            cls, s, w = classify_slacks(slacks, tol)
            pairs.append(PairReport(j, k, cls, s, w, slacks))
    return ObstructionReport(pairs, tol)


# -- splitting at well passages ----------------------------------------------


@dataclass
class WellSplit:
    times: list
    wells: list
    arcs: list
    energy_gap: float = 0.0

    @property
    def J(self) -> int:
        return len(self.times)


def default_well_radius(pot: Potential) -> float:
    pts = pot.well_points
    if len(pts) < 2:
        return 1e-3
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    return 1e-3 * float(np.min(d[np.triu_indices(len(pts), 1)]))


def _segment_distances(X, w):
    a, b = X[:-1], X[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, np.einsum("ij,ij->i", w - a, d) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * d - w, axis=1), t


def _endpoint_well(pot, point, radius):
    pts = pot.well_points
    if not len(pts):
        return None
    d = np.linalg.norm(pts - point, axis=1)
    i = int(np.argmin(d))
    return i if d[i] <= radius else None


def split_at_wells(gr, pot: Potential, well_radius: float | None = None) -> WellSplit:
    """Cut a geodesic at every interior passage through a well neighbourhood.

    Each maximal run of segments within ``well_radius`` of one well becomes
    a single passage at the closest approach; the passage point is snapped
    onto the well so every sub-arc starts and ends exactly at a well.
    """
    curve = gr.curve if isinstance(gr, GeodesicResult) else gr
    radius = default_well_radius(pot) if well_radius is None else float(well_radius)
    if not radius > 0:
        raise ArgumentError("well_radius must be positive")
    X = curve.nodes
    nseg = len(X) - 1
    start = _endpoint_well(pot, X[0], radius)
    end = _endpoint_well(pot, X[-1], radius)

    near = np.full(nseg, -1)
    closest = {}
    for idx, w in enumerate(pot.well_points):
        if idx in (start, end):
            continue
        dist, t = _segment_distances(X, w)
        hit = dist <= radius
        clash = hit & (near >= 0)
        if np.any(clash):
            other = int(near[np.flatnonzero(clash)[0]])
            raise GeometryError(
                f"curve is within {radius:g} of wells {other} and {idx} at once; use a smaller well_radius"
            )
        near[hit] = idx
        closest[idx] = (dist, t)

    passages = []
    i = 0
    while i < nseg:
        if near[i] < 0:
            i += 1
            continue
        idx = int(near[i])
        j = i
        while j + 1 < nseg and near[j + 1] == idx:
            j += 1
        dist, t = closest[idx]
        best = i + int(np.argmin(dist[i : j + 1]))
        passages.append((best, float(t[best]), idx))
        i = j + 1

    visited = [start] + [p[2] for p in passages] + [end]
    for a, b in zip(visited[:-1], visited[1:]):
        if a is not None and a == b:
            raise GeometryError(f"curve leaves and re-enters the neighbourhood of well {a}")

    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])
    total = cum[-1]
    arcs = []
    times = [0.0]
    prev_nodes = [X[0]] if start is None else [pot.wells[start].point]
    cursor = 1
    for seg, t, idx in passages:
        w = pot.wells[idx].point
        body = [x for x in X[cursor : seg + 1] if not np.array_equal(x, w)]
        arcs.append(DiscreteCurve(np.array(prev_nodes + body + [w])))
        times.append(float((cum[seg] + t * (cum[seg + 1] - cum[seg])) / total))
        prev_nodes = [w]
        cursor = seg + 1
    tail = [x for x in X[cursor:-1] if not (passages and np.array_equal(x, prev_nodes[0]))]
    last = X[-1] if end is None else pot.wells[end].point
    arcs.append(DiscreteCurve(np.array(prev_nodes + tail + [last])))
    times.append(1.0)

    parent = gr.energy if isinstance(gr, GeodesicResult) else weighted_length(curve, pot)
    gap = math.fsum(weighted_length(a, pot) for a in arcs) - parent
    return WellSplit(times, visited, arcs, gap)


# -- epsilon sweep for the Alikakos-Fusco family ------------------------------


@dataclass
class SweepPoint:
    eps: float
    classification: str
    slack: float
    d_direct: float
    d_via_ieps: float
    passage_distance: float


@dataclass
class SweepResult:
    estimate: float | None
    message: str
    points: list
    bracket: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "message": self.message,
            "bracket": list(self.bracket) if self.bracket else None,
            "points": [vars(p) for p in self.points],
        }


def classify_alikakos_fusco(eps: float, opts: SolveOptions | None = None, tol_rel: float = OBSTRUCTION_RTOL) -> SweepPoint:
    """Classification of the pair (-1, 1) of W_eps, with i*eps as the intermediate well."""
    pot = make_alikakos_fusco(eps)
    dm = distance_matrix(pot, opts)
    rep = obstruction_report(dm, tol_rel * dm.scale)
    pair = rep.pair(0, 1)
    direct = dm.result(0, 1)
    return SweepPoint(
        eps=float(eps),
        classification=pair.classification,
        slack=float(pair.min_slack),
        d_direct=float(dm.values[0, 1]),
        d_via_ieps=float(dm.values[0, 2] + dm.values[2, 1]),
        passage_distance=float(direct.well_proximity[2].distance),
    )


def sweep_epsilon(lo: float, hi: float, tol: float = 0.02, opts: SolveOptions | None = None,
                  tol_rel: float = OBSTRUCTION_RTOL) -> SweepResult:
    """Bisect on eps for the switch DEGENERATE -> STRICT of the pair (-1, 1)."""
    if not (0 < lo <= hi):
        raise ArgumentError("need 0 < lo <= hi")
    if not tol > 0:
        raise ArgumentError("bisection tolerance must be positive")
    points = []

    def probe(e):
        pt = classify_alikakos_fusco(e, opts, tol_rel)
        points.append(pt)
        return pt.classification != STRICT

    if lo == hi:
        probe(lo)
        return SweepResult(None, f"single point: {points[0].classification}", points)
    low_obstructed = probe(lo)
    high_obstructed = probe(hi)
    if low_obstructed == high_obstructed:
        cls = points[0].classification
        return SweepResult(None, f"no transition in range (both ends {cls})", points)
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if probe(mid) == low_obstructed:
            a = mid
        else:
            b = mid
    points.sort(key=lambda p: p.eps)
    return SweepResult(0.5 * (a + b), "transition found", points, (a, b))
