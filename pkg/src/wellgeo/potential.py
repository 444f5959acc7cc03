"""Multi-well potentials W: R^N -> [0, inf) with gradients and declared wells."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import expr as _expr
from .errors import ArgumentError

WELL_TOL = 1e-12


@dataclass(frozen=True)
class Well:
    index: int
    point: np.ndarray
    name: str = ""

    @property
    def label(self):
        return self.name or f"p{self.index + 1}"


@dataclass(frozen=True, eq=False)
class Potential:
    """Vectorised evaluator for W and grad W plus the authoritative well list.

    ``value_fn`` maps an ``(k, N)`` array to ``(k,)``; ``grad_fn`` maps it to
    ``(k, N)``.  Wells are declared, never discovered.
    """

    dimension: int
    wells: tuple
    value_fn: Callable
    grad_fn: Callable
    smoothness_note: str = "analytic"
    name: str = "custom"
    params: dict = field(default_factory=dict)
    scale: float = 1.0
    source: dict | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ArgumentError("dimension must be >= 1")
        for w in self.wells:
            if w.point.shape != (self.dimension,):
                raise ArgumentError(f"well {w.label} has wrong dimension")
        pts = self.well_points
        for j in range(len(pts)):
            for k in range(j + 1, len(pts)):
                if np.linalg.norm(pts[j] - pts[k]) == 0.0:
                    raise ArgumentError(f"wells {j} and {k} coincide")

    @property
    def well_points(self) -> np.ndarray:
        if not self.wells:
            return np.zeros((0, self.dimension))
        return np.array([w.point for w in self.wells])

    @property
    def m(self) -> int:
        return len(self.wells)

    @property
    def smooth_at_wells(self) -> bool:
        return "not C1" not in self.smoothness_note

    def _check(self, points):
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        if points.shape[-1] != self.dimension:
            raise ArgumentError(
                f"point dimension {points.shape[-1]} does not match potential dimension {self.dimension}"
            )
        return points, single

    def value(self, points) -> np.ndarray:
        points, single = self._check(points)
        out = np.asarray(self.value_fn(points), dtype=float) * self.scale
        # wells are exact zeros regardless of rounding in the closed form
        for w in self.wells:
            out[np.all(points == w.point, axis=1)] = 0.0
        return out[0] if single else out

    def gradient(self, points) -> np.ndarray:
        points, single = self._check(points)
        out = np.asarray(self.grad_fn(points), dtype=float) * self.scale
        return out[0] if single else out

    def scaled(self, c2: float) -> "Potential":
        """Potential c2 * W (same wells)."""
        if not c2 > 0:
            raise ArgumentError("scale factor must be positive")
        return Potential(
            self.dimension,
            self.wells,
            self.value_fn,
            self.grad_fn,
            self.smoothness_note,
            self.name,
            dict(self.params),
            self.scale * c2,
            self.source,
        )

    def well_index(self, ref) -> int:
        """Resolve ``ref`` (index, 'p3', '3' 1-based, or a well name) to a 0-based index."""
        if isinstance(ref, (int, np.integer)):
            if 0 <= ref < self.m:
                return int(ref)
            raise ArgumentError(f"well index {ref} out of range (m={self.m})")
        text = str(ref).strip()
        for w in self.wells:
            if text == w.label or (w.name and text == w.name):
                return w.index
        lowered = text.lower().lstrip("p")
        if lowered.isdigit() and 1 <= int(lowered) <= self.m:
            return int(lowered) - 1
        raise ArgumentError(f"unknown well {ref!r}; known: {[w.label for w in self.wells]}")


def eval_W(pot: Potential, p) -> float:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ArgumentError("eval_W expects a single N-vector")
    return float(pot.value(p))


def eval_gradW(pot: Potential, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ArgumentError("eval_gradW expects a single N-vector")
    return pot.gradient(p)


def _wells(points, names=None):
    pts = [np.asarray(p, dtype=float) for p in points]
    names = names or [""] * len(pts)
    return tuple(Well(i, p, n) for i, (p, n) in enumerate(zip(pts, names)))


# -- built-ins ---------------------------------------------------------------


def make_double_well(lambda_transverse: float = 1.0, N: int = 2) -> Potential:
    """W(p) = 1/4 (1 - p1^2)^2 + lambda/2 * sum_{i>=2} p_i^2, wells (+-1, 0, ..., 0)."""
    if not lambda_transverse > 0:
        raise ArgumentError("lambda_transverse must be positive")
    N = int(N)
    if N < 1:
        raise ArgumentError("N must be >= 1")
    lam = float(lambda_transverse)

    def value(P):
        return 0.25 * (1.0 - P[:, 0] ** 2) ** 2 + 0.5 * lam * np.sum(P[:, 1:] ** 2, axis=1)

    def grad(P):
        g = np.empty_like(P)
        g[:, 0] = -P[:, 0] * (1.0 - P[:, 0] ** 2)
        g[:, 1:] = lam * P[:, 1:]
        return g

    e = np.zeros(N)
    e[0] = 1.0
    return Potential(
        N, _wells([-e, e]), value, grad, "analytic", "double_well",
        {"lambda_transverse": lam, "N": N},
    )


def make_alikakos_fusco(eps: float) -> Potential:
    """W(x, y) = |(1 - z^2)(z - i eps)|^2 with z = x + iy, in real arithmetic."""
    eps = float(eps)

    def parts(P):
        x, y = P[:, 0], P[:, 1]
        a = 1.0 - x * x + y * y  # Re(1 - z^2)
        b = -2.0 * x * y  # Im(1 - z^2)
        c, d = x, y - eps  # z - i eps
        re = a * c - b * d
        im = a * d + b * c
        # f'(z) = (1 - z^2) - 2 z (z - i eps)
        zr = x * c - y * d
        zi = x * d + y * c
        fr = a - 2.0 * zr
        fi = b - 2.0 * zi
        return re, im, fr, fi

    def value(P):
        re, im, _, _ = parts(P)
        return re * re + im * im

    def grad(P):
        re, im, fr, fi = parts(P)
        # Cauchy-Riemann: d(re)/dx = fr, d(im)/dx = fi, d(re)/dy = -fi, d(im)/dy = fr
        gx = 2.0 * (re * fr + im * fi)
        gy = 2.0 * (-re * fi + im * fr)
        return np.stack([gx, gy], axis=1)

    wells = _wells([(-1.0, 0.0), (1.0, 0.0), (0.0, eps)], ["minus_one", "plus_one", "i_eps"])
    return Potential(2, wells, value, grad, "analytic", "alikakos_fusco", {"eps": eps})


def make_six_well() -> Potential:
    """x^2(1-x^2)^2 + (y^2 - (1-x^2)^2/2)^2 + (z^2 - (1-x^2)^2/2)^2 on R^3."""

    def value(P):
        x, y, z = P[:, 0], P[:, 1], P[:, 2]
        a = 0.5 * (1.0 - x * x) ** 2
        return x * x * (1.0 - x * x) ** 2 + (y * y - a) ** 2 + (z * z - a) ** 2

    def grad(P):
        x, y, z = P[:, 0], P[:, 1], P[:, 2]
        u = 1.0 - x * x
        a = 0.5 * u * u
        da = -2.0 * x * u
        gx = 2.0 * x * u * u - 4.0 * x**3 * u - 2.0 * (y * y - a) * da - 2.0 * (z * z - a) * da
        gy = 4.0 * y * (y * y - a)
        gz = 4.0 * z * (z * z - a)
        return np.stack([gx, gy, gz], axis=1)

    r = 1.0 / math.sqrt(2.0)
    pts = [(-1, 0, 0), (1, 0, 0), (0, r, r), (0, r, -r), (0, -r, -r), (0, -r, r)]
    return Potential(3, _wells(pts), value, grad, "analytic", "six_well", {})


def make_oscillatory(p1, p2) -> Potential:
    """prod_j (2 + sin(1/|p - p_j|)) |p - p_j|^2, set to 0 at the wells.

    W is differentiable at the wells (gradient 0) but grad W does not extend
    continuously there: it oscillates with amplitude O(1) as p -> p_j.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape or p1.ndim != 1:
        raise ArgumentError("p1 and p2 must be N-vectors of equal length")
    centers = np.stack([p1, p2])
    tiny = 1e-300

    def factors(P):
        diff = P[:, None, :] - centers[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        safe = np.where(r < tiny, 1.0, r)
        s = np.sin(1.0 / safe)
        g = np.where(r < tiny, 0.0, (2.0 + s) * r * r)
        dg = 2.0 * safe * (2.0 + s) - np.cos(1.0 / safe)  # d g / d r
        grad_g = np.where((r < tiny)[:, :, None], 0.0, (dg / safe)[:, :, None] * diff)
        return g, grad_g

    def value(P):
        g, _ = factors(P)
        return g[:, 0] * g[:, 1]

    def grad(P):
        g, gg = factors(P)
        return gg[:, 0] * g[:, 1:2] + gg[:, 1] * g[:, 0:1]

    return Potential(
        p1.shape[0], _wells([p1, p2]), value, grad, "analytic (not C1 at wells)",
        "oscillatory", {"p1": p1.tolist(), "p2": p2.tolist()},
    )


def from_expression(text: str, dimension: int, wells, names=None) -> Potential:
    """Potential from expression text; gradients by forward-mode autodiff."""
    ast = _expr.parse_expression(text, dimension)

    def value(P):
        return _expr.evaluate(ast, P)

    def grad(P):
        return _expr.value_and_gradient(ast, P)[1]

    pot = Potential(
        int(dimension), _wells(wells, names), value, grad, "autodiff", "expression",
        {"expression": text},
    )
    _check_wells_are_zeros(pot)
    return pot


def from_callable(W: Callable, dimension: int, wells, grad: Callable | None = None) -> Potential:
    """Wrap a vectorised callable; without ``grad`` a central-difference gradient is used."""
    if grad is None:

        def grad(P):
            h = 1e-6 * np.maximum(1.0, np.linalg.norm(P, axis=1))
            out = np.empty_like(P)
            for i in range(P.shape[1]):
                e = np.zeros_like(P)
                e[:, i] = h
                out[:, i] = (W(P + e) - W(P - e)) / (2.0 * h)
            return out

        note = "finite-difference"
    else:
        note = "analytic"
    pot = Potential(int(dimension), _wells(wells), W, grad, note, "callable", {})
    _check_wells_are_zeros(pot)
    return pot


def _check_wells_are_zeros(pot):
    if not pot.m:
        return
    raw = np.asarray(pot.value_fn(pot.well_points), dtype=float) * pot.scale
    bad = np.flatnonzero(np.abs(raw) > WELL_TOL)
    if bad.size:
        raise ArgumentError(
            f"declared wells are not zeros of W: "
            + ", ".join(f"{pot.wells[i].label} (W={raw[i]:.3e})" for i in bad)
        )


BUILTINS = {
    "double_well": make_double_well,
    "alikakos_fusco": make_alikakos_fusco,
    "six_well": make_six_well,
    "oscillatory": make_oscillatory,
}


def make_builtin(name: str, params: dict | None = None) -> Potential:
    params = dict(params or {})
    if name not in BUILTINS:
        raise ArgumentError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
    if name == "oscillatory":
        params.setdefault("p1", [-1.0, 0.0])
        params.setdefault("p2", [1.0, 0.0])
    if name == "alikakos_fusco":
        params.setdefault("eps", 0.3)
    try:
        pot = BUILTINS[name](**params)
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {name}: {exc}") from None
    return Potential(
        pot.dimension, pot.wells, pot.value_fn, pot.grad_fn, pot.smoothness_note,
        pot.name, pot.params, pot.scale, {"builtin": name, "params": params},
    )


def potential_from_dict(doc: dict) -> Potential:
    """Build a potential from its JSON document form."""
    if not isinstance(doc, dict):
        raise ArgumentError("potential document must be a JSON object")
    if "builtin" in doc:
        pot = make_builtin(doc["builtin"], doc.get("params"))
    elif "expression" in doc:
        try:
            dim = int(doc["dimension"])
            wells = doc["wells"]
        except (KeyError, TypeError, ValueError):
            raise ArgumentError("expression potentials need 'dimension' and 'wells'") from None
        pot = from_expression(doc["expression"], dim, wells, doc.get("names"))
        pot = Potential(
            pot.dimension, pot.wells, pot.value_fn, pot.grad_fn, pot.smoothness_note,
            pot.name, pot.params, pot.scale, dict(doc),
        )
    else:
        raise ArgumentError("potential document needs 'builtin' or 'expression'")
    scale = doc.get("scale")
    return pot.scaled(float(scale)) if scale is not None else pot


def load_potential(path) -> Potential:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArgumentError(f"cannot read potential file {path}: {exc}") from None
    return potential_from_dict(doc)


def potential_to_dict(pot: Potential) -> dict:
    doc = dict(pot.source) if pot.source else {"name": pot.name, "params": pot.params}
    if pot.scale != 1.0:
        doc["scale"] = pot.scale
    return doc


# -- assumption probes -------------------------------------------------------


@dataclass
class ProbeConfig:
    R_probe: float = 10.0
    n_sphere: int = 1000
    delta_probe: float = 0.1
    n_ball: int = 400
    n_box: int = 2000
    n_local_searches: int = 20
    exclusion_radius: float | None = None
    seed: int = 0


@dataclass
class AssumptionReport:
    a1_zero_set_ok: bool
    a1_worst_violation: float
    a1_spurious_zeros: list
    a2_liminf_estimate: float
    a4_quadratic_bound: list
    notes: list

    @property
    def ok(self) -> bool:
        return (
            self.a1_zero_set_ok
            and self.a2_liminf_estimate > 0
            and all(entry["ok"] for entry in self.a4_quadratic_bound)
        )

    def to_dict(self):
        return {
            "a1_zero_set_ok": self.a1_zero_set_ok,
            "a1_worst_violation": self.a1_worst_violation,
            "a1_spurious_zeros": self.a1_spurious_zeros,
            "a2_liminf_estimate": self.a2_liminf_estimate,
            "a4_quadratic_bound": self.a4_quadratic_bound,
            "notes": self.notes,
            "ok": self.ok,
        }


def _unit_vectors(rng, n, N):
    v = rng.standard_normal((n, N))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def validate_assumptions(pot: Potential, probe: ProbeConfig | None = None) -> AssumptionReport:
    """Sample-based evidence for the zero-set, coercivity and quadratic-bound assumptions.

    Nothing here is a proof; a passing report only means no violation was
    found among the samples.
    """
    probe = probe or ProbeConfig()
    rng = np.random.default_rng(probe.seed)
    N = pot.dimension
    pts = pot.well_points
    notes = []

    # zero set: declared wells vanish, and no other zero shows up in a box
    worst = float(np.max(np.abs(pot.value_fn(pts)) * pot.scale)) if pot.m else 0.0
    ok = worst <= WELL_TOL
    if not ok:
        notes.append(f"a declared well has |W| = {worst:.3e} > {WELL_TOL}")
    if pot.m >= 2:
        sep = min(np.linalg.norm(pts[j] - pts[k]) for j in range(pot.m) for k in range(j + 1, pot.m))
    else:
        sep = 1.0
    excl = probe.exclusion_radius or 0.05 * sep
    center = pts.mean(axis=0) if pot.m else np.zeros(N)
    half = (np.max(np.abs(pts - center)) if pot.m else 1.0) + 1.0
    box = center + rng.uniform(-half, half, size=(probe.n_box, N))
    vals = pot.value(box)
    spurious = []
    order = np.argsort(vals)[: probe.n_local_searches]
    for i in order:
        res = minimize(
            lambda p: float(pot.value(p)),
            box[i],
            jac=lambda p: pot.gradient(p),
            method="L-BFGS-B",
            options={"ftol": 1e-20, "gtol": 1e-14, "maxiter": 500},
        )
        p = res.x
        if res.fun < 1e-10 and (not pot.m or np.min(np.linalg.norm(pts - p, axis=1)) > excl):
            if all(np.linalg.norm(p - q) > excl for q in spurious):
                spurious.append(p)
    if spurious:
        ok = False
        notes.append(f"found {len(spurious)} zero(s) of W away from the declared wells")
    if np.any(vals < 0):
        ok = False
        notes.append("W is negative at some sampled points")

    # behaviour at infinity: minimum of W on a large sphere
    if N == 1:
        sphere = np.array([[probe.R_probe], [-probe.R_probe]])
    else:
        sphere = probe.R_probe * _unit_vectors(rng, probe.n_sphere, N)
    a2 = float(np.min(pot.value(sphere)))
    if a2 <= 0:
        notes.append(f"W vanishes on the probe sphere |p| = {probe.R_probe}")

    # quadratic bound near each well: W(p) <= C |p - p_j|^2
    a4 = []
    for w in pot.wells:
        radii = probe.delta_probe * rng.uniform(0.0, 1.0, probe.n_ball) ** (1.0 / max(N, 1))
        radii = np.maximum(radii, 1e-6 * probe.delta_probe)
        dirs = _unit_vectors(rng, probe.n_ball, N) if N > 1 else rng.choice([-1.0, 1.0], (probe.n_ball, 1))
        sample = w.point + radii[:, None] * dirs
        ratio = pot.value(sample) / radii**2
        C = float(np.max(ratio))
        ls = float(np.sum(pot.value(sample) * radii**2) / np.sum(radii**4))
        entry_ok = bool(np.isfinite(C) and C > 0)
        a4.append({"well": w.label, "C": C, "delta": probe.delta_probe, "ls_coefficient": ls, "ok": entry_ok})
        if not entry_ok:
            notes.append(f"quadratic bound probe inconclusive at {w.label}")

    notes.append("sample-based evidence only; no violation found means none among the samples")
    return AssumptionReport(
        ok, worst, [p.tolist() for p in spurious], a2, a4, notes,
    )

