"""Command-line entry point: ``hullscope <command> [options]``.

Exit codes: 0 success, 2 schema/config error, 3 numerical failure,
4 unstable membership verdict.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HullscopeError, SchemaError
from .families import _center_map
from .fiber import (
    dual_transform,
    fit_diagonal_quadric,
    hypoconvexity_margin,
    level_set_points,
    sphere_directions,
)
from .hardy import AnalyticMap
from .hull import (
    HullQuery,
    classify_trichotomy,
    hull_slice,
    level_family_scan,
    membership,
    recenter_on_graph,
)
from .lempert import ModelFiber, extremal_disc, green_u1
from .report import RunRecord, Table, content_hash, emit_report, parse_scenario, render_svg
from .solver import SolveConfig, solve_gamma

LOGGER = logging.getLogger("hullscope")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_UNSTABLE = 0, 2, 3, 4

DEFAULT_SCENARIO = {"family": "shifted-conjugate", "n": 2, "level": 2.0}


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_complex(text) -> complex:
    """``0.4``, ``"0.5j"``, ``"1+2i"`` or ``[re, im]``."""
    if isinstance(text, (list, tuple)):
        if len(text) != 2:
            raise SchemaError(f"complex pair must have 2 entries: {text!r}")
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float)):
        return complex(text)
    s = str(text).strip().replace(" ", "").replace("i", "j")
    if s.startswith("["):
        return parse_complex(json.loads(s))
    try:
        return complex(s)
    except ValueError:
        raise SchemaError(f"not a complex number: {text!r}") from None


def parse_vector(text) -> np.ndarray:
    """JSON list whose entries are numbers, complex strings or ``[re, im]`` pairs."""
    try:
        items = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError:
        raise SchemaError(f"not a JSON list: {text!r}") from None
    if not isinstance(items, list):
        raise SchemaError(f"expected a list, got {text!r}")
    return np.array([parse_complex(v) for v in items], dtype=complex)


def _json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise SchemaError(f"{what} is not valid JSON: {text!r}") from None


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--grid", type=int, default=256, help="circle samples M (power of two)")
    g.add_argument("--degree", type=int, default=32, help="series degree N")
    g.add_argument("--starts", type=int, default=1, help="multistart count")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-3, help="verdict tolerance band")
    g.add_argument("--out", type=Path, help="output path (.json, or .csv for tabular commands)")
    g.add_argument("--plot", type=Path, help="SVG output path")
    g.add_argument("--reproducible", action="store_true",
                   help="omit wall time so reruns are byte-identical")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _scenario_flag(p, required=False):
    p.add_argument("--scenario", type=Path, required=required,
                   help="scenario JSON file (default: shifted-conjugate, level 2)")


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="hullscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hullscope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="min-max value and flat optimizer")
    _scenario_flag(p)

    p = sub.add_parser("member", parents=[common], help="hull membership of one point")
    _scenario_flag(p)
    p.add_argument("--z0", default="0")
    p.add_argument("--w0", required=True, help='JSON list, e.g. "[0,0]"')
    p.add_argument("--level", type=float)
    p.add_argument("--no-stability", action="store_true", help="skip the grid-doubling check")

    p = sub.add_parser("slice", parents=[common], help="membership verdicts on a complex line")
    _scenario_flag(p)
    p.add_argument("--z0", default="0")
    p.add_argument("--level", type=float)
    p.add_argument("--section", default="w1", help="coordinate line w<k>")
    p.add_argument("--center", help="JSON list; default phi_hat(z0)")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--extent", type=float, default=2.0)

    p = sub.add_parser("classify", parents=[common], help="empty / single-graph / many-graphs")
    _scenario_flag(p)
    p.add_argument("--level", type=float)

    p = sub.add_parser("scan-levels", parents=[common], help="membership across a level schedule")
    _scenario_flag(p)
    p.add_argument("--levels", required=True, help='JSON list, e.g. "[1,1.25,1.5,2]"')
    p.add_argument("--probes", default='[[0, [0, 0]]]', help="JSON list of [z0, w0]")

    p = sub.add_parser("dual", parents=[common], help="dual-complement image of one fiber")
    _scenario_flag(p)
    p.add_argument("--z", default="1")
    p.add_argument("--resolution", type=int, default=8)
    p.add_argument("--center", help="JSON list; default the fiber anchor")

    p = sub.add_parser("check-hypoconvex", parents=[common], help="tangent-Hessian margins")
    _scenario_flag(p)
    p.add_argument("--fiber-res", type=int, default=8)

    p = sub.add_parser("green", parents=[common], help="u1 on a model fiber")
    p.add_argument("--fiber", required=True, help='JSON, e.g. \'{"kind":"ellipsoid","a":[2,1]}\'')
    p.add_argument("--probe", required=True, help="JSON list")
    p.add_argument("--nu-points", type=int, default=256)

    p = sub.add_parser("disc", parents=[common], help="extremal disc and left inverse")
    p.add_argument("--fiber", required=True)
    p.add_argument("--nu", required=True, help="JSON list, unit vector")
    p.add_argument("--check", action="store_true", help="verify F(f(lambda)) = lambda and u1 on the disc")

    p = sub.add_parser("recenter", parents=[common], help="solve after w -> w + f(z)")
    _scenario_flag(p)
    p.add_argument("--shift", required=True, help="coefficients [degree][component] = [re, im]")
    return parser


# ---------------------------------------------------------------------------
# commands


def _scenario(args):
    doc = DEFAULT_SCENARIO if args.scenario is None else None
    if doc is None:
        try:
            doc = json.loads(args.scenario.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{args.scenario}: invalid JSON ({exc})") from None
    return doc, parse_scenario(doc).scenario


def _config(args) -> SolveConfig:
    try:
        return SolveConfig(degree=args.degree, grid=args.grid, starts=args.starts, seed=args.seed)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def _level(args, scenario):
    return scenario.level if getattr(args, "level", None) is None else args.level


def cmd_solve(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    res = solve_gamma(sc, cfg)
    grid = cfg.circle
    out = res.to_json()
    table = Table(["k", "arg_z", "rho"], [[k, a, v] for k, (a, v) in
                                           enumerate(zip(grid.angles, res.grid_values))])
    plot = {"kind": "flatness", "angles": grid.angles, "values": res.grid_values}
    return doc, cfg, out, {"converged": res.converged}, table, plot, EXIT_OK


def cmd_member(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    q = HullQuery(parse_complex(args.z0), tuple(parse_vector(args.w0)), _level(args, sc), cfg)
    v = membership(q, sc, args.tol, check_stability=not args.no_stability)
    code = EXIT_UNSTABLE if v.unstable else EXIT_OK
    return doc, cfg, v.to_json(), {"unstable_verdict": v.unstable}, None, None, code


def cmd_slice(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    if not args.section.startswith("w") or not args.section[1:].isdigit():
        raise SchemaError(f"section must look like w1, w2, ...; got {args.section!r}")
    k = int(args.section[1:]) - 1
    if not 0 <= k < sc.n:
        raise SchemaError(f"section {args.section} outside n = {sc.n}")
    d = np.zeros(sc.n, dtype=complex)
    d[k] = 1
    center = None if args.center is None else parse_vector(args.center)
    s = hull_slice(sc, parse_complex(args.z0), _level(args, sc), cfg, center=center,
                   direction=d, extent=args.extent, res=args.res, tol=args.tol)
    out = s.to_json()
    if s.inside_count == 0:
        out["note"] = "zero inside verdicts"
    table = Table(["zeta_re", "zeta_im", "value", "verdict"], list(s.rows()))
    plot = {"kind": "slice", "zeta": s.zeta, "verdicts": s.verdicts, "boundary": s.boundary_points()}
    return doc, cfg, out, {"unstable_count": int(np.sum(s.unstable))}, table, plot, EXIT_OK


def cmd_classify(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    t = classify_trichotomy(sc, _level(args, sc), cfg, tol=args.tol)
    out = t.to_json()
    if t.case == "empty":
        out["inside_verdicts"] = 0
        out["note"] = "zero inside verdicts: best achievable value exceeds the level"
    return doc, cfg, out, {}, None, None, EXIT_OK


def cmd_scan_levels(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    levels = _json_arg(args.levels, "--levels")
    probes = [(parse_complex(z0), parse_vector(w0)) for z0, w0 in _json_arg(args.probes, "--probes")]
    fam = level_family_scan(sc, levels, probes, cfg, args.tol)
    table = Table(["level", "probe", "value", "verdict"], list(fam.rows()))
    return doc, cfg, fam.to_json(), {"monotone": fam.monotone}, table, None, EXIT_OK


def cmd_dual(args):
    doc, sc = _scenario(args)
    z = parse_complex(args.z)
    center = sc.anchor_at(z) if args.center is None else parse_vector(args.center)
    dirs = sphere_directions(sc.n, args.resolution)
    pts = level_set_points(sc, np.array([z]), dirs)[0]
    img = dual_transform(sc, z, pts, center=center)
    q, resid = fit_diagonal_quadric(img)
    radii = np.linalg.norm(img, axis=-1)
    out = {"z": z, "center": center, "samples": len(pts), "quadric": q, "quadric_residual": resid,
           "image_radius_min": float(radii.min()), "image_radius_max": float(radii.max())}
    rows = [[i, *np.column_stack([w.real, w.imag]).ravel(), *np.column_stack([u.real, u.imag]).ravel()]
            for i, (w, u) in enumerate(zip(pts, img))]
    header = ["i"] + [f"{p}{j + 1}_{c}" for p in ("w", "dual") for j in range(sc.n) for c in ("re", "im")]
    return doc, None, out, {}, Table(header, rows), None, EXIT_OK


def cmd_check_hypoconvex(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    grid = cfg.circle
    rep = hypoconvexity_margin(sc, grid, args.fiber_res)
    pts = level_set_points(sc, grid.nodes, sphere_directions(sc.n, args.fiber_res))
    header = ["z_index", "sample"] + [f"w{j + 1}_{c}" for j in range(sc.n) for c in ("re", "im")] + ["kappa"]
    return doc, cfg, rep.to_json(), {}, Table(header, list(rep.rows(grid, pts))), None, EXIT_OK


def _fiber(args):
    doc = _json_arg(args.fiber, "--fiber")
    try:
        return doc, ModelFiber.from_json(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"bad fiber: {exc}") from None


def cmd_green(args):
    doc, fiber = _fiber(args)
    w = parse_vector(args.probe)
    g = green_u1(fiber, nu_points=args.nu_points)
    out = {"fiber": fiber.to_json(), "probe": w, "u1": g(w), "closed_form": float(g.closed_form(w)),
           "maximizing_nu": g.maximizer(w)}
    return {"fiber": doc}, None, out, {}, None, None, EXIT_OK


def cmd_disc(args):
    doc, fiber = _fiber(args)
    d = extremal_disc(fiber, parse_vector(args.nu))
    out = {"fiber": fiber.to_json(), "nu": d.nu, "center": d.f(0.0),
           "derivative_at_zero": d.derivative_at_zero, "left_inverse_direction": np.conj(d.mu) / fiber.axes}
    if args.check:
        rng = np.random.default_rng(args.seed)
        lam = 0.95 * np.sqrt(rng.random(32)) * np.exp(2j * np.pi * rng.random(32))
        out["left_inverse_error"] = float(np.max(np.abs(d.F(d.f(lam)) - lam)))
        out["green_on_disc_error"] = float(np.max(np.abs(green_u1(fiber)(d.f(lam)) - np.abs(lam) ** 2)))
    return {"fiber": doc}, None, out, {}, None, None, EXIT_OK


def cmd_recenter(args):
    doc, sc = _scenario(args)
    cfg = _config(args)
    f = _center_map(_json_arg(args.shift, "--shift"), sc.n)
    if f.degree > cfg.degree:
        raise SchemaError("shift degree exceeds --degree")
    moved = recenter_on_graph(sc, f)
    before = solve_gamma(sc, cfg)
    after = solve_gamma(moved, cfg)
    out = {"shift": f.to_json(), "gamma_hat": before.gamma_hat, "gamma_hat_recentered": after.gamma_hat,
           "phi_hat": before.phi_hat.to_json(), "phi_hat_recentered": after.phi_hat.to_json()}
    return doc, cfg, out, {}, None, None, EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "member": cmd_member, "slice": cmd_slice, "classify": cmd_classify,
    "scan-levels": cmd_scan_levels, "dual": cmd_dual, "check-hypoconvex": cmd_check_hypoconvex,
    "green": cmd_green, "disc": cmd_disc, "recenter": cmd_recenter,
}


def _paths(out: Path | None, tabular: bool):
    if out is None:
        return None, None
    if out.suffix == ".csv":
        return out.with_suffix(".json"), out
    return out, (out.with_suffix(".csv") if tabular else None)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    try:
        inputs, cfg, outputs, stability, table, plot, code = COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"hullscope: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except HullscopeError as exc:
        print(f"hullscope: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"hullscope: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    wall = None if args.reproducible else time.perf_counter() - t0
    config = cfg.to_json() if cfg is not None else {}
    config["verdict_tol"] = args.tol
    hashed = {"command": args.command, "inputs": inputs, "config": config,
              "arguments": {k: str(v) for k, v in sorted(vars(args).items())
                            if k not in ("out", "plot", "verbose", "reproducible")}}
    record = RunRecord(command=["hullscope", *argv], config=config, inputs_hash=content_hash(hashed),
                       outputs=outputs, wall_time=wall, stability=stability, tables=table, plot=plot)
    json_path, csv_path = _paths(args.out, table is not None)
    if json_path is None:
        sys.stdout.write(record.dumps())
        if args.plot is not None and plot is not None:
            args.plot.write_text(render_svg(plot))
    else:
        emit_report(record, json_path, csv_path, args.plot)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
