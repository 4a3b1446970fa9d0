"""Command-line entry point.

Every subcommand writes ``<subcommand>.json`` into the output directory
(``--out``, else ``$NLSGRAPH_OUT``, else the working directory), plus CSV
files for profiles and tables.  Each JSON document embeds a run manifest
and is validated against the schema shipped in ``nlsgraph/schemas``
before it is written.

Exit codes: 0 success, 1 domain error (bad input, failed property
check), 2 numerical failure (a run that ended without classification).
"""

from __future__ import annotations

import argparse
import dataclasses
import enum
import hashlib
import json
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from . import closed_forms as cf
from . import function_space as fs
from . import graph_model as gm
from . import minimize as mn
from . import phase_scan as ps
from . import rearrange as ra

OUT_ENV = "NLSGRAPH_OUT"
SCHEMA_DIR = Path(__file__).with_name("schemas")
EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 1, 2

# masses sampled by the concavity check; equally spaced so midpoints and sums stay on the grid
CONCAVITY_MASSES = (0.5, 1.0, 1.5, 2.0)
SCALING_FACTORS = (0.5, 2.0, 4.0)


class UsageError(ValueError):
    """Unknown subcommand or malformed flags."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# -- serialization ------------------------------------------------------------

def _plain(obj):
    """Recursively turn dataclasses, enums and numpy scalars into JSON types."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, indent: int = 0) -> str:
    """JSON text with floats printed to 17 significant digits; non-finite floats become null."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _registry() -> Registry:
    resources = []
    for path in sorted(SCHEMA_DIR.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def validate(document: dict, name: str) -> None:
    """Validate ``document`` against ``schemas/<name>.schema.json``; raises on mismatch."""
    schema = json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())
    Draft202012Validator(schema, registry=_registry()).validate(document)


def digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _csv_table(rows, header: str) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# -- subcommands ----------------------------------------------------------------
# Each handler returns (config, inputs, result, files, exit code); ``files`` maps
# output names to text and is written next to the JSON.

def _solver_config(args) -> mn.MinimizeConfig:
    return mn.MinimizeConfig(max_iterations=args.max_iterations, seed=args.seed,
                             mesh_size=args.h, truncation=args.truncation)


def _config_dict(cfg: mn.MinimizeConfig, s: cf.SolitonModel, mu: float) -> dict:
    grid = cfg.grid(s, mu)
    out = {k: v for k, v in _plain(cfg).items() if k != "custom_seed"}
    out.update(mesh_size=grid.mesh_size, truncation=grid.truncation)
    return out


def _solve(args):
    g = gm.load_graph(args.graph)
    s = cf.soliton_constants(args.p)
    cfg = _solver_config(args)
    if args.seed_vertex is not None:
        cfg = dataclasses.replace(cfg, seed_vertex=args.seed_vertex)
    r = mn.minimize(g, args.mass, s, cfg)
    rep = fs.evaluate(r.final_function, args.p)
    result = r.summary()
    result.update(
        normalizedEnergy=cf.normalized_energy(s, args.mass, r.energy),
        solitonEnergy=cf.soliton_energy_line(s, args.mass),
        halflineEnergy=cf.soliton_energy_halfline(s, args.mass),
        supOnCore=rep.sup_location.on_core,
        profile="solve_profile.csv" if args.csv else None,
    )
    files = {"solve_profile.csv": r.final_function.to_csv()} if args.csv else {}
    config = {"graph": args.graph, "mass": args.mass, "p": args.p, "csv": args.csv,
              "seed_vertex": args.seed_vertex, "solver": _config_dict(cfg, s, args.mass)}
    code = EXIT_NUMERICAL if r.status == mn.Status.MAX_ITER else EXIT_OK
    return config, {args.graph: digest(args.graph)}, result, files, code


def _soliton(args):
    if not args.mass > 0:
        raise ValueError("mass must be positive")
    if args.points < 2:
        raise ValueError("need at least two profile points")
    s = cf.soliton_constants(args.p)
    extent = args.extent if args.extent is not None else fs.TRUNCATION_DECAY_LENGTHS * s.decay_length(args.mass)
    result = {
        "p": args.p, "mass": args.mass, "alpha": s.alpha, "beta": s.beta,
        "amplitude": s.amplitude, "width": s.width, "thetaP": s.theta,
        "multiplier": cf.soliton_multiplier(s, args.mass),
        "energyLine": cf.soliton_energy_line(s, args.mass),
        "energyHalfline": cf.soliton_energy_halfline(s, args.mass),
        "profile": "soliton_profile.csv" if args.csv else None,
    }
    files = {}
    if args.csv:
        x = np.linspace(-extent, extent, args.points)
        files["soliton_profile.csv"] = _csv_table(zip(x.tolist(), cf.soliton_value(s, args.mass, x).tolist()),
                                                  "x,value")
    config = {"p": args.p, "mass": args.mass, "csv": args.csv, "extent": extent, "points": args.points}
    return config, {}, result, files, EXIT_OK


def _competitor(args):
    s = cf.soliton_constants(args.p)
    family = ra.Family(args.family)
    grid = fs.GridSpec.default(s, args.mass, args.h, args.truncation)
    u = ra.build_competitor(family, args.lengths, args.mass, s, grid)
    cert = ra.competitor_certificate(u, args.mass, s)
    result = {"family": family.value, "lengths": list(map(float, args.lengths)),
              "graph": u.mesh.graph.to_dict(), "mass": cert.mass, "energy": cert.energy,
              "solitonEnergy": cert.soliton_energy, "certified": cert.certified,
              "profile": "competitor_profile.csv"}
    config = {"family": family.value, "lengths": list(map(float, args.lengths)), "mass": args.mass,
              "p": args.p, "mesh_size": grid.mesh_size, "truncation": grid.truncation}
    return config, {}, result, {"competitor_profile.csv": u.to_csv()}, EXIT_OK


def _threshold(args):
    cfg = _solver_config(args)
    s = cf.soliton_constants(args.p)
    coarse = tuple(args.coarse) if args.coarse else ps.DEFAULT_COARSE_GRID
    res = ps.scan_threshold(args.N, args.p, cfg, mu=args.mass, coarse=coarse,
                            bracket_tolerance=args.tolerance, jobs=args.jobs)
    result = res.to_dict()
    result.update(bracketTolerance=args.tolerance, table="threshold_table.csv")
    table = _csv_table(((x.ell, x.decision.value, x.energy) for x in res.samples), "parameter,decision,energy")
    config = {"N": args.N, "p": args.p, "mass": args.mass, "coarse": list(coarse), "tolerance": args.tolerance,
              "jobs": args.jobs, "solver": _config_dict(cfg, s, args.mass)}
    code = EXIT_OK if res.bracket is not None else EXIT_NUMERICAL
    return config, {}, result, {"threshold_table.csv": table}, code


def _broom(args):
    cfg = _solver_config(args)
    s = cf.soliton_constants(args.p)
    ev = ps.broom_nonexistence(args.n, args.ell, args.mass, args.p, cfg)
    result = ev.to_dict()
    result["table"] = "broom_table.csv"
    scaled = args.mass**s.beta * args.ell
    norm_e = cf.normalized_energy(s, args.mass, ev.infimum_estimate)
    table = _csv_table([(scaled, ev.decision.value, norm_e)], "parameter,decision,energy")
    config = {"n": args.n, "ell": args.ell, "mass": args.mass, "p": args.p,
              "solver": _config_dict(cfg, s, args.mass)}
    code = EXIT_NUMERICAL if ev.decision == ps.Decision.INCONCLUSIVE else EXIT_OK
    return config, {}, result, {"broom_table.csv": table}, code


def _check_item(name, cases, violations, worst):
    return {"name": name, "passed": violations == 0, "cases": cases, "violations": violations, "worst": worst}


def inequality_suite(g: gm.MetricGraph, p: float, count: int, seed: int, grid: fs.GridSpec,
                     solver: mn.MinimizeConfig, jobs: int = 1) -> list[dict]:
    """Gagliardo-Nirenberg, scaling and concavity checks on ``g``.

    ``worst`` is the largest lhs/rhs ratio for the inequalities, the largest
    relative deviation for scaling, and the smallest margin for concavity.
    """
    s = cf.soliton_constants(p)
    mesh = fs.Mesh(g, grid)
    rng = np.random.default_rng(seed)
    gn_ratio, sup_ratio, gn_bad, sup_bad = 0.0, 0.0, 0, 0
    for _ in range(count):
        u = fs.random_function(mesh, rng)
        chk = fs.check_gagliardo_nirenberg(u, p)
        gn_ratio = max(gn_ratio, chk.lhs / chk.rhs)
        sup_ratio = max(sup_ratio, chk.sup_lhs / chk.sup_rhs)
        gn_bad += not chk.holds
        sup_bad += not chk.sup_holds

    scale_dev, scale_bad = 0.0, 0
    for k in range(min(count, 20)):
        u = fs.mass_project(fs.random_function(mesh, rng), 1.0)
        base = _normalized_quantities(u, s)
        for t in SCALING_FACTORS:
            v = fs.rescale(u, t, s)
            got = _normalized_quantities(v, s)
            dev = max(abs(a - b) / abs(b) for a, b in zip(got, base))
            scale_dev = max(scale_dev, dev)
            scale_bad += not dev <= 1e-12

    curve = mn.energy_level_curve(g, CONCAVITY_MASSES, s, solver, jobs=jobs)
    e = {x.mu: x.energy for x in curve}
    margins = []
    for a, b, c in zip(CONCAVITY_MASSES, CONCAVITY_MASSES[1:], CONCAVITY_MASSES[2:]):
        margins.append(e[b] - 0.5 * (e[a] + e[c]))
    for i, a in enumerate(CONCAVITY_MASSES):
        for b in CONCAVITY_MASSES[i:]:
            if a + b in e:
                margins.append(e[a] + e[b] - e[a + b])
    conc_bad = sum(m <= 0 for m in margins)
    return [
        _check_item("gagliardo_nirenberg", count, gn_bad, gn_ratio),
        _check_item("sup_inequality", count, sup_bad, sup_ratio),
        _check_item("scaling", min(count, 20) * len(SCALING_FACTORS), scale_bad, scale_dev),
        _check_item("concavity_subadditivity", len(margins), conc_bad, min(margins)),
    ]


def _normalized_quantities(u: fs.DiscreteFunction, s: cf.SolitonModel) -> tuple[float, ...]:
    m = fs.mass(u)
    rep = fs.evaluate(u, s.p)
    n = m ** (-2 * s.beta - 1)
    return rep.energy * n, rep.kinetic * n, rep.potential * n, rep.sup_norm**2 * m ** (-s.beta - 1)


def _check(args):
    g = gm.load_graph(args.graph)
    if g.is_compact:
        raise ValueError("the inequality suite needs a noncompact graph")
    if args.count < 1:
        raise ValueError("count must be positive")
    s = cf.soliton_constants(args.p)
    h = args.h if args.h is not None else s.decay_length(1.0) / 400
    grid = fs.GridSpec.default(s, 1.0, h, args.truncation)
    solver = mn.MinimizeConfig(seed=args.seed)
    checks = inequality_suite(g, args.p, args.count, args.seed, grid, solver, args.jobs)
    passed = all(c["passed"] for c in checks)
    result = {"suite": args.suite, "graph": g.to_dict(), "p": args.p, "passed": passed, "checks": checks}
    config = {"graph": args.graph, "suite": args.suite, "p": args.p, "count": args.count, "seed": args.seed,
              "jobs": args.jobs, "mesh_size": grid.mesh_size, "truncation": grid.truncation,
              "masses": list(CONCAVITY_MASSES), "scaling_factors": list(SCALING_FACTORS),
              "solver": _config_dict(solver, s, 1.0)}
    return config, {args.graph: digest(args.graph)}, result, {}, EXIT_OK if passed else EXIT_DOMAIN


# -- parser and driver --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or the working directory)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    solver = _Parser(add_help=False)
    solver.add_argument("--h", type=float, default=None, help="mesh size (default scales with the mass)")
    solver.add_argument("--truncation", type=float, default=None, help="half-line cutoff length")
    solver.add_argument("--max-iterations", type=int, default=mn.MinimizeConfig.max_iterations)

    parser = _Parser(prog="nlsgraph", description="NLS ground states on noncompact metric graphs")
    parser.add_argument("--version", action="version", version=version())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common, solver], help="minimize the energy at fixed mass")
    p.add_argument("--graph", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed-vertex", default=None, help="core vertex for the half-soliton seed")
    p.add_argument("--csv", action="store_true", help="also write the final function")
    p.set_defaults(handler=_solve)

    p = sub.add_parser("soliton", parents=[common], help="soliton constants and energy levels")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--csv", action="store_true", help="also write a sampled profile")
    p.add_argument("--extent", type=float, default=None, help="profile half-width")
    p.add_argument("--points", type=int, default=2001)
    p.set_defaults(handler=_soliton)

    p = sub.add_parser("competitor", parents=[common], help="explicit competitor and its certificate")
    p.add_argument("--family", required=True, type=str.upper, choices=[f.value for f in ra.Family])
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--lengths", type=float, nargs="+", required=True)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--truncation", type=float, default=None)
    p.set_defaults(handler=_competitor)

    p = sub.add_parser("threshold", parents=[common, solver], help="bracket the star-with-pendant threshold")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-2, help="bracket width in scale-invariant units")
    p.add_argument("--coarse", type=float, nargs="+", default=None, help="coarse scale-invariant lengths")
    p.set_defaults(handler=_threshold)

    p = sub.add_parser("broom", parents=[common, solver], help="nonexistence evidence for a broom")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(handler=_broom)

    p = sub.add_parser("check", parents=[common], help="property suites on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--suite", required=True, choices=["inequalities"])
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--count", type=int, default=1000, help="random functions per inequality")
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--truncation", type=float, default=None)
    p.set_defaults(handler=_check)
    return parser


def out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or ".")


def run(argv=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        start = time.perf_counter()
        config, inputs, result, files, code = args.handler(args)
        config = _plain({**config, "seed": args.seed, "jobs": args.jobs})
        manifest = {"subcommand": args.command, "config": config, "inputs": inputs, "version": version(),
                    "durationSeconds": time.perf_counter() - start}
        document = {"manifest": manifest, "result": _plain(result)}
        validate(document, args.command)
        out = out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(dumps(document) + "\n")
        for name, text in files.items():
            (out / name).write_text(text)
        return code
    except mn.NumericalFailure as exc:
        print(f"nlsgraph: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"nlsgraph: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
