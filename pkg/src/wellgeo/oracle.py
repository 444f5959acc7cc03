"""Lattice shortest paths with conformal edge weights, an independent check on d(p, q).

Edge u -> v costs sqrt(W((u + v) / 2)) * |v - u|, the same midpoint rule
the curve functionals use.  Costs overestimate the continuous distance by
the stencil's metrication error (at most sec(pi/8) - 1 for 8 neighbours).
Long-reach edges that would leave the box are skipped.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .curve import DiscreteCurve
from .errors import ArgumentError, UnsupportedDimensionError
from .potential import Potential

OCTILE_BOUND = 1.0 / math.cos(math.pi / 8.0) - 1.0
KNIGHT_BOUND = 1.0 / math.cos(math.atan(0.5) / 2.0) - 1.0


@dataclass(frozen=True)
class GridSpec:
    lower: tuple
    upper: tuple
    resolution: tuple
    reach: int = 1

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        res = self.resolution
        if isinstance(res, (int, np.integer)):
            res = (int(res),) * len(lo)
        res = tuple(int(r) for r in res)
        if not (len(lo) == len(hi) == len(res)):
            raise ArgumentError("lower, upper and resolution must have one entry per axis")
        if len(lo) not in (2, 3):
            raise UnsupportedDimensionError(f"grid oracle supports N = 2 or 3, got {len(lo)}")
        if any(r < 16 for r in res):
            raise ArgumentError("resolution must be >= 16 per axis")
        if self.reach not in (1, 2):
            raise ArgumentError("stencil reach must be 1 (8/26 neighbours) or 2 (16/98 neighbours)")
        if any(not h > l for l, h in zip(lo, hi)):
            raise ArgumentError("box must have upper > lower on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def around(cls, points, resolution, margin: float = 0.5, reach: int = 1) -> "GridSpec":
        """Box enclosing ``points`` with a relative margin."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = margin * max(float(np.max(hi - lo)), 1.0)
        return cls(tuple(lo - pad), tuple(hi + pad), resolution, reach)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.resolution) - 1)

    def axes(self):
        return [np.linspace(l, h, r) for l, h, r in zip(self.lower, self.upper, self.resolution)]

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.array(self.lower)) and np.all(p <= np.array(self.upper)))


@dataclass
class GridResult:
    cost: float
    path: DiscreteCurve
    snapped: tuple
    snap_distance: tuple
    snap_drift: float

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "snapped": [list(map(float, s)) for s in self.snapped],
            "snap_distance": list(self.snap_distance),
            "snap_drift": self.snap_drift,
            "path_nodes": int(self.path.nodes.shape[0]),
        }


def flat_potential(dimension: int = 2) -> Potential:
    """W = 1 everywhere and no wells; exercises the graph machinery alone."""
    return Potential(
        dimension,
        (),
        lambda P: np.ones(P.shape[0]),
        lambda P: np.zeros_like(P),
        "constant",
        "flat",
    )


def stencil(d: int, reach: int = 1):
    """Neighbour stencil in lexicographic order with its forward/backward bookkeeping.

    Reach 1 is the 8 (2-D) or 26 (3-D) neighbourhood; reach 2 adds every
    offset with entries in [-2, 2] whose entries are coprime (knight moves
    in 2-D), which cuts the worst-case metrication error to about 2.7%.
    """
    span = range(-reach, reach + 1)
    offsets = [o for o in itertools.product(span, repeat=d) if any(o) and math.gcd(*o) == 1]
    forward = [o for o in offsets if o > (0,) * d]
    index = {o: i for i, o in enumerate(forward)}
    half = []
    at_target = []
    for o in offsets:
        if o in index:
            half.append(index[o])
            at_target.append(False)
        else:
            half.append(index[tuple(-v for v in o)])
            at_target.append(True)
    return (
        np.array(offsets, dtype=np.int64),
        np.array(forward, dtype=np.int64),
        np.array(half, dtype=np.int64),
        np.array(at_target, dtype=bool),
    )


def edge_weights(pot: Potential, spec: GridSpec, forward) -> np.ndarray:
    """(H, n_nodes) midpoint-rule weight of edge node -> node + forward[h]."""
    mesh = np.stack(np.meshgrid(*spec.axes(), indexing="ij"), axis=-1).reshape(-1, spec.dimension)
    h = spec.spacing
    out = np.empty((len(forward), mesh.shape[0]))
    for i, o in enumerate(forward):
        step = o * h
        F = np.sqrt(np.maximum(pot.value(mesh + 0.5 * step), 0.0))
        out[i] = F * float(np.linalg.norm(step))
    return out


def _snap(spec: GridSpec, p):
    idx = np.rint((p - np.array(spec.lower)) / spec.spacing).astype(np.int64)
    idx = np.clip(idx, 0, np.array(spec.resolution) - 1)
    node = np.array(spec.lower) + idx * spec.spacing
    return idx, node


def grid_distance(pot: Potential, p, q, spec: GridSpec) -> GridResult:
    """Dijkstra from the node nearest p to the node nearest q."""
    if pot.dimension not in (2, 3):
        raise UnsupportedDimensionError(f"grid oracle supports N = 2 or 3, got {pot.dimension}")
    if spec.dimension != pot.dimension:
        raise ArgumentError("grid and potential dimensions differ")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for name, pt in (("p", p), ("q", q)):
        if not spec.contains(pt):
            raise ArgumentError(f"{name} = {pt.tolist()} lies outside the grid box")
    shape = np.array(spec.resolution, dtype=np.int64)
    ip, np_ = _snap(spec, p)
    iq, nq = _snap(spec, q)
    src = int(np.ravel_multi_index(tuple(ip), tuple(shape)))
    dst = int(np.ravel_multi_index(tuple(iq), tuple(shape)))
    offsets, forward, half, at_target = stencil(spec.dimension, spec.reach)
    weights = edge_weights(pot, spec, forward)
    cost, pred = _accel.lattice_dijkstra(shape, offsets, half, at_target, weights, src, dst)

    chain = [dst]
    while chain[-1] != src:
        chain.append(int(pred[chain[-1]]))
    flat = np.array(chain[::-1])
    coords = np.array(np.unravel_index(flat, tuple(shape))).T
    path = DiscreteCurve(np.array(spec.lower) + coords * spec.spacing)
    if len(flat) > 1:
        # re-add the path's edges with fsum so the cost does not depend on direction
        lookup = {tuple(o): i for i, o in enumerate(offsets.tolist())}
        steps = [lookup[tuple(o)] for o in np.diff(coords, axis=0).tolist()]
        at = np.where(at_target[steps], flat[1:], flat[:-1])
        cost = math.fsum(weights[half[steps], at])

    dp = float(np.linalg.norm(p - np_))
    dq = float(np.linalg.norm(q - nq))
    Fp = math.sqrt(max(float(pot.value(p)), 0.0)) + math.sqrt(max(float(pot.value(np_)), 0.0))
    Fq = math.sqrt(max(float(pot.value(q)), 0.0)) + math.sqrt(max(float(pot.value(nq)), 0.0))
    drift = 0.5 * (Fp * dp + Fq * dq)
    return GridResult(float(cost), path, (np_, nq), (dp, dq), drift)
