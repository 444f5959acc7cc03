"""Polyline curves and the functionals defined on them."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateInteriorError
from .potential import Potential

DEGENERATE_W = 1e-14


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Ordered nodes x_0..x_n in R^N; endpoints stay put when ``fixed_endpoints``."""

    nodes: np.ndarray
    fixed_endpoints: bool = True

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] < 1:
            raise ArgumentError("curve nodes must be a non-empty (n+1, N) array")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def segment(cls, p, q, n: int) -> "DiscreteCurve":
        """Straight segment from p to q with n segments (n+1 nodes)."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        nodes = (1.0 - t) * p + t * q
        nodes[0], nodes[-1] = p, q
        return cls(nodes)

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0] - 1

    def reversed(self) -> "DiscreteCurve":
        return DiscreteCurve(self.nodes[::-1].copy(), self.fixed_endpoints)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    def arclength_parameter(self) -> np.ndarray:
        """Cumulative Euclidean arc length normalised to [0, 1]."""
        c = np.concatenate([[0.0], np.cumsum(self.segment_lengths())])
        return c / c[-1] if c[-1] > 0 else np.linspace(0.0, 1.0, len(c))

    def split(self, i: int):
        """Two curves sharing node i."""
        return DiscreteCurve(self.nodes[: i + 1]), DiscreteCurve(self.nodes[i:])


def _check_dims(c: DiscreteCurve, pot: Potential):
    if c.dimension != pot.dimension:
        raise ArgumentError(
            f"curve dimension {c.dimension} does not match potential dimension {pot.dimension}"
        )


def sqrt_W(pot: Potential, points) -> np.ndarray:
    """F = sqrt(max(W, 0)); clamps float noise just below zero."""
    return np.sqrt(np.maximum(pot.value(points), 0.0))


def segment_weights(c: DiscreteCurve, pot: Potential) -> np.ndarray:
    """Per-segment midpoint-rule contributions F(m_i) |s_i|."""
    _check_dims(c, pot)
    if c.n_segments == 0:
        return np.zeros(0)
    return sqrt_W(pot, c.midpoints()) * c.segment_lengths()


def weighted_length(c: DiscreteCurve, pot: Potential) -> float:
    """Midpoint-rule E: sum_i sqrt(W((x_i + x_{i+1})/2)) |x_{i+1} - x_i|.

    Summed with ``math.fsum`` so the result does not depend on node order.
    """
    return math.fsum(segment_weights(c, pot))


def euclidean_length(c: DiscreteCurve) -> float:
    return math.fsum(c.segment_lengths())


def _dedupe(nodes):
    keep = np.concatenate([[True], np.linalg.norm(np.diff(nodes, axis=0), axis=1) > 0])
    out = nodes[keep]
    if len(out) >= 2 and not np.array_equal(out[-1], nodes[-1]):
        out[-1] = nodes[-1]
    return out


def _interp_along(nodes, cum, targets):
    out = np.empty((len(targets), nodes.shape[1]))
    for k in range(nodes.shape[1]):
        out[:, k] = np.interp(targets, cum, nodes[:, k])
    return out


def resample_uniform_arclength(c: DiscreteCurve, n: int) -> DiscreteCurve:
    """n+1 nodes at equal Euclidean arc-length spacing along the polyline."""
    if n < 2:
        raise ArgumentError("resampling needs n >= 2")
    nodes = _dedupe(c.nodes)
    if len(nodes) < 2:
        return DiscreteCurve(np.repeat(c.nodes[:1], n + 1, axis=0), c.fixed_endpoints)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
    targets = np.linspace(0.0, cum[-1], n + 1)
    out = _interp_along(nodes, cum, targets)
    out[0] = c.nodes[0]
    out[-1] = c.nodes[-1]
    return DiscreteCurve(out, c.fixed_endpoints)


def reparametrize_degenerate_arclength(
    c: DiscreteCurve, pot: Potential, n: int, *, max_iter: int = 200, rtol: float = 1e-12
) -> DiscreteCurve:
    """Place n+1 nodes so every segment carries the same weighted length E/n.

    Nodes stay on the input polyline; the equal-share condition is imposed
    on the discrete (midpoint-rule) segment contributions and reached by a
    fixed-point equidistribution iteration.
    """
    _check_dims(c, pot)
    if n < 1:
        raise ArgumentError("n must be >= 1")
    nodes = _dedupe(c.nodes)
    if len(nodes) < 2:
        raise ArgumentError("curve has zero length")
    interior = nodes[1:-1]
    if len(interior) and np.min(pot.value(interior)) < DEGENERATE_W:
        i = int(np.argmin(pot.value(interior))) + 1
        raise DegenerateInteriorError(
            f"curve touches the zero set at interior node {i} ({nodes[i].tolist()})"
        )
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
    total = cum[-1]

    # initial guess: invert the cumulative weighted length on a refined polyline
    fine = np.linspace(0.0, total, max(8 * n, 4 * len(nodes)) + 1)
    pts = _interp_along(nodes, cum, fine)
    seg = sqrt_W(pot, 0.5 * (pts[1:] + pts[:-1])) * np.diff(fine)
    phi = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.interp(np.linspace(0.0, phi[-1], n + 1), phi, fine)

    for _ in range(max_iter):
        x = _interp_along(nodes, cum, s)
        e = sqrt_W(pot, 0.5 * (x[1:] + x[:-1])) * np.linalg.norm(np.diff(x, axis=0), axis=1)
        target = e.sum() / n
        if np.max(np.abs(e - target)) <= rtol * e.sum():
            break
        C = np.concatenate([[0.0], np.cumsum(e)])
        s_new = np.interp(np.linspace(0.0, C[-1], n + 1), C, s)
        s_new[0], s_new[-1] = 0.0, total
        s = s_new
    x = _interp_along(nodes, cum, s)
    x[0], x[-1] = c.nodes[0], c.nodes[-1]
    return DiscreteCurve(x, c.fixed_endpoints)


@dataclass(frozen=True)
class WellProximity:
    well: int
    distance: float
    node: int

    def to_dict(self):
        return {"well": self.well, "distance": self.distance, "node": self.node}


def _point_segment_distance(points, a, b):
    """Distance from ``points`` (P, N) to each segment a_i b_i -> (P, S)."""
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    rel = points[:, None, :] - a[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, np.einsum("psj,sj->ps", rel, d) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=2)


def min_distance_to_wells(c: DiscreteCurve, pot: Potential) -> list[WellProximity]:
    """Per well: exact minimum distance over nodes and segments, and the nearest node."""
    _check_dims(c, pot)
    out = []
    wells = pot.well_points
    if not len(wells):
        return out
    node_d = np.linalg.norm(c.nodes[None, :, :] - wells[:, None, :], axis=2)
    if c.n_segments:
        seg_d = _point_segment_distance(wells, c.nodes[:-1], c.nodes[1:]).min(axis=1)
    else:
        seg_d = node_d.min(axis=1)
    for j in range(len(wells)):
        out.append(WellProximity(j, float(min(seg_d[j], node_d[j].min())), int(np.argmin(node_d[j]))))
    return out


# -- dumps -------------------------------------------------------------------


def fmt(x: float) -> str:
    return f"{x:.12g}"


def curve_to_csv(c: DiscreteCurve) -> str:
    t = c.arclength_parameter()
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"x{i + 1}" for i in range(c.dimension)]) + "\n")
    for ti, row in zip(t, c.nodes):
        buf.write(",".join([fmt(ti)] + [fmt(v) for v in row]) + "\n")
    return buf.getvalue()


def curve_from_csv(text: str) -> DiscreteCurve:
    rows = [line.split(",") for line in text.strip().splitlines()]
    header = rows[0]
    if not header or header[0] != "t":
        raise ArgumentError("curve CSV must start with a 't' column")
    data = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return DiscreteCurve(data)


def curve_to_dict(c: DiscreteCurve, pot: Potential | None = None) -> dict:
    doc = {
        "t": c.arclength_parameter().tolist(),
        "nodes": c.nodes.tolist(),
    }
    if pot is not None:
        doc["E"] = weighted_length(c, pot)
        doc["W"] = pot.value(c.nodes).tolist()
    return doc
