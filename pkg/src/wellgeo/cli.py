"""Command-line entry point: ``wellgeo <command> [options]``.

Exit codes: 0 success, 2 solver did not converge or a probe flagged a
violation, 1 any error (bad input, unknown well, unreadable file).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .curve import curve_to_csv
from .errors import WellgeoError
from .geodesic import SolveOptions, minimize_E
from .heteroclinic import connect
from .metric import default_tolerance, distance_matrix, obstruction_report, sweep_epsilon
from .oracle import GridSpec, grid_distance
from .potential import ProbeConfig, load_potential, make_builtin, validate_assumptions

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


# -- output helpers ----------------------------------------------------------


def _clean(obj):
    """Round floats to 12 significant digits; non-finite values become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


class Output:
    def __init__(self, args):
        self.dir = Path(args.out) if args.out else None
        self.format = args.format
        self.argv = list(getattr(args, "_argv", []))
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        if self.dir:
            (self.dir / name).write_text(text)

    def finish(self, name: str, doc: dict, table: str | None = None, csv: str | None = None):
        text = dumps(doc)
        self.write(name, text)
        if self.dir:
            meta = {"command": self.argv, "version": __version__, "timestamp": time.time()}
            (self.dir / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
        if self.format == "table" and table is not None:
            sys.stdout.write(table)
        elif self.format == "csv" and csv is not None:
            sys.stdout.write(csv)
        else:
            sys.stdout.write(text)


# -- argument plumbing -------------------------------------------------------


def parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise WellgeoError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            params[k.strip()] = v
    return params


def resolve_potential(args):
    src = args.potential
    params = parse_params(args.param)
    if src.startswith("builtin:"):
        return make_builtin(src.split(":", 1)[1], params)
    if params:
        raise WellgeoError("--param only applies to builtin potentials")
    return load_potential(src)


def solve_options(args, **extra) -> SolveOptions:
    kw = {"node_count": args.nodes, "seed": args.seed}
    if getattr(args, "max_iterations", None) is not None:
        kw["max_iterations"] = args.max_iterations
    if getattr(args, "restarts", None) is not None:
        kw["n_random_restarts"] = args.restarts
    kw.update(extra)
    return SolveOptions(**kw)


def _point_or_well(pot, text):
    if "," in text:
        return np.array([float(v) for v in text.split(",")])
    return pot.wells[pot.well_index(text)].point


# -- commands ----------------------------------------------------------------


def cmd_geodesic(args) -> int:
    pot = resolve_potential(args)
    j, k = pot.well_index(args.source), pot.well_index(args.target)
    res = minimize_E(pot, pot.wells[j].point, pot.wells[k].point, solve_options(args))
    out = Output(args)
    out.write("curve.csv", curve_to_csv(res.curve))
    doc = {"from": pot.wells[j].label, "to": pot.wells[k].label, **res.to_dict(include_curve=args.out is None)}
    table = (
        f"{pot.wells[j].label} -> {pot.wells[k].label}  E = {res.energy:.12g}  "
        f"converged = {res.converged}  iterations = {res.iterations}\n"
    )
    out.finish("geodesic.json", doc, table, curve_to_csv(res.curve))
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_connect(args) -> int:
    pot = resolve_potential(args)
    conn = connect(
        pot, args.source, args.target, solve_options(args),
        n_samples=args.samples, cutoff=args.cutoff,
    )
    out = Output(args)
    for i, prof in enumerate(conn.profiles):
        out.write(f"profile_{i}.csv", prof.to_csv(pot))
    out.write("curve.csv", curve_to_csv(conn.geodesic.curve))
    doc = conn.to_dict()
    doc["visited"] = [pot.wells[w].label if w is not None else None for w in conn.visited]
    lines = [f"profiles: {len(conn.profiles)}  visited: {' -> '.join(map(str, doc['visited']))}"]
    for prof in conn.profiles:
        lines.append(
            f"  H = {prof.action:.12g}  ode = {prof.residuals['ode_residual']:.3g}  "
            f"equipartition = {prof.residuals['equipartition_residual']:.3g}"
        )
    if conn.obstructed:
        ends = doc["visited"][0], doc["visited"][-1]
        lines.append(f"no minimizing connection between {ends[0]} and {ends[1]}")
    csv = "".join(p.to_csv(pot) for p in conn.profiles)
    out.finish("connect.json", doc, "\n".join(lines) + "\n", csv)
    return EXIT_OK if conn.geodesic.converged else EXIT_NOT_CONVERGED


def render_matrix(dm, rep) -> str:
    labels = dm.labels
    first = max(len(l) for l in labels) + 2
    width = max(16, first)
    rows = ["".ljust(first) + "".join(l.rjust(width) for l in labels)]
    for j, l in enumerate(labels):
        rows.append(l.ljust(first) + "".join(f"{dm.values[j, k]:.12g}".rjust(width) for k in range(dm.m)))
    rows.append("")
    for p in rep.pairs:
        via = f" via {labels[p.witness]} (slack {p.min_slack:.3g})" if p.witness is not None else ""
        rows.append(f"{labels[p.j]}-{labels[p.k]}: {p.classification}{via}")
    return "\n".join(rows) + "\n"


def cmd_distances(args) -> int:
    pot = resolve_potential(args)
    dm = distance_matrix(pot, solve_options(args))
    tol = args.tol if args.tol is not None else default_tolerance(dm)
    rep = obstruction_report(dm, tol)
    out = Output(args)
    csv = "".join(",".join(f"{v:.12g}" for v in row) + "\n" for row in dm.values)
    out.finish("distances.json", {"matrix": dm.to_dict(), "obstruction": rep.to_dict()}, render_matrix(dm, rep), csv)
    return EXIT_NOT_CONVERGED if dm.failed else EXIT_OK


def cmd_sweep_epsilon(args) -> int:
    res = sweep_epsilon(args.lo, args.hi, args.tol, solve_options(args))
    out = Output(args)
    lines = [f"{'eps':>10} {'class':>12} {'slack':>14} {'passage':>12}"]
    for p in res.points:
        lines.append(f"{p.eps:>10.6f} {p.classification:>12} {p.slack:>14.6g} {p.passage_distance:>12.4g}")
    lines.append(res.message + (f": eps* ~ {res.estimate:.6f}" if res.estimate is not None else ""))
    out.finish("sweep.json", res.to_dict(), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    pot = resolve_potential(args)
    p = _point_or_well(pot, args.source)
    q = _point_or_well(pot, args.target)
    pts = np.vstack([p, q, pot.well_points]) if pot.m else np.vstack([p, q])
    spec = GridSpec.around(pts, args.resolution, args.margin, args.reach)
    res = grid_distance(pot, p, q, spec)
    out = Output(args)
    out.write("path.csv", curve_to_csv(res.path))
    doc = {"box": [list(spec.lower), list(spec.upper)], "resolution": list(spec.resolution), **res.to_dict()}
    out.finish("oracle.json", doc, f"grid cost = {res.cost:.12g}\n", curve_to_csv(res.path))
    return EXIT_OK


def cmd_validate(args) -> int:
    pot = resolve_potential(args)
    rep = validate_assumptions(pot, ProbeConfig(seed=args.seed))
    out = Output(args)
    doc = rep.to_dict()
    doc["ok"] = rep.ok
    out.finish("validate.json", doc, ("ok" if rep.ok else "violations found") + "\n")
    return EXIT_OK if rep.ok else EXIT_NOT_CONVERGED


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--potential", default="builtin:double_well",
                        help="potential JSON file or builtin:NAME (double_well, alikakos_fusco, six_well, oscillatory)")
    common.add_argument("--param", action="append", metavar="K=V", help="builtin parameter, repeatable")
    common.add_argument("--nodes", type=int, default=256, help="curve segments")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--max-iterations", type=int)
    solver.add_argument("--restarts", type=int, help="number of random bump restarts")

    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--from", dest="source", default="p1", help="well label, name or 1-based index")
    pair.add_argument("--to", dest="target", default="p2")

    parser = argparse.ArgumentParser(prog="wellgeo", description="Geodesics and heteroclinic orbits of multi-well potentials")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geodesic", parents=[common, solver, pair], help="minimising geodesic between two wells")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("connect", parents=[common, solver, pair], help="heteroclinic profiles between two wells")
    p.add_argument("--samples", type=int, default=2000, help="x-samples per profile")
    p.add_argument("--cutoff", type=float, default=1e-3, help="truncation distance from the end wells")
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("distances", parents=[common, solver], help="distance matrix and obstruction report")
    p.add_argument("--tol", type=float, help="obstruction tolerance (default 2e-4 x largest distance)")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("sweep-epsilon", parents=[common, solver], help="locate the connection threshold of the Alikakos-Fusco family")
    p.add_argument("--lo", type=float, default=0.3)
    p.add_argument("--hi", type=float, default=0.9)
    p.add_argument("--tol", type=float, default=0.02, help="bisection tolerance in eps")
    p.set_defaults(func=cmd_sweep_epsilon)

    p = sub.add_parser("oracle", parents=[common, pair], help="lattice shortest-path distance")
    p.add_argument("--resolution", type=int, default=600)
    p.add_argument("--reach", type=int, choices=(1, 2), default=1, help="stencil reach (1: 8/26 neighbours)")
    p.add_argument("--margin", type=float, default=0.5)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", parents=[common], help="probe the structural assumptions on W")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    args._argv = argv
    try:
        return args.func(args)
    except (WellgeoError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
