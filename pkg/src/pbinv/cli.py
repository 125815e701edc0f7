"""Command-line front end: scenes, runs, structured records, plots.

Every run prints exactly one JSON record to standard output.  Rerunning a
command with the same configuration and seed reproduces the record's
``results`` bit-for-bit on the same build; ``wall_time_s`` is the only field
allowed to differ.  Numeric results always carry an ``error_budget`` — the
measurement margin, quadrature budget, or 0.0 for closed-form quantities.
Traces and trajectories go to CSV sidecars named by scene hash and seed;
``--plot`` adds SVG figures when matplotlib is importable.

Exit codes: 0 success, 1 runtime/selftest failure, 2 usage error, 3 scene
validation failure, 4 guarantee violation (a construction failing one of its
certified inequalities).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .certificates import check_admissible, scene_lower_bound
from .constructions import (ConstructedPair, flow_average_function,
                            linear_flow_average_inputs, phased_quad_pair,
                            quadrilateral_pair, sphere_profile_pair,
                            triangle_cutoff_map)
from .dynamics import find_chords
from .errors import (GuaranteeViolation, PbinvError, SceneValidationError,
                     UsageError)
from .fields import poisson_bracket, sup_norm, surface_mesh
from .geometry import Scene, scene_from_json, scene_hash, validate_scene
from .kernels import HAS_NUMBA, set_threads
from .optimizer import (OptimizerConfig, estimate_pb, estimate_profile,
                        theoretical_profile_bounds)
from .scenes_library import (builtin_scenes, commuting_zero_pair,
                             construction_pair_for_scene, get_scene,
                             parse_real, reference_pair_for_scene,
                             seed_pair_for_scene)
from .selftest import run_selftest

PAIR_CHOICES = ("construction", "quad-construction", "phased", "reference",
                "commuting")


# ---------------------------------------------------------------------------
# Record plumbing
# ---------------------------------------------------------------------------

def _qty(value: float, budget: float = 0.0) -> dict:
    """A measured number and the error budget that travels with it."""
    return {"value": float(value), "error_budget": float(budget)}


def _claims_block(pair: ConstructedPair) -> list:
    return [c.as_dict() for c in pair.claims]


def _emit(record: dict, started: float) -> None:
    record["wall_time_s"] = time.perf_counter() - started
    json.dump(record, sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")


def _scene_for(args) -> tuple[Scene, str]:
    """Resolve --scene NAME or --scene-file PATH to (scene, its hash)."""
    if getattr(args, "scene_file", None):
        with open(args.scene_file, "r", encoding="utf-8") as fh:
            scene = scene_from_json(fh.read())
        validate_scene(scene)
        return scene, scene_hash(scene)
    if not getattr(args, "scene", None):
        raise UsageError("one of --scene or --scene-file is required")
    scene = get_scene(args.scene).scene
    return scene, scene_hash(scene)


def _pair_for(scene: Scene, which: str):
    """Build the requested analytic pair; returns (F, G, pair-or-None)."""
    if which in ("construction", "quad-construction"):
        pair = construction_pair_for_scene(scene)
        return pair.F, pair.G, pair
    if which == "phased":
        pair = seed_pair_for_scene(scene)
        return pair.F, pair.G, pair
    if which == "reference":
        F, G = reference_pair_for_scene(scene)
        return F, G, None
    if which == "commuting":
        F, G = commuting_zero_pair(scene)
        return F, G, None
    raise UsageError(f"unknown pair {which!r}; choices: {PAIR_CHOICES}")


def _tag(scene_h: Optional[str], seed: int, params: Optional[dict] = None) -> str:
    """Sidecar filename stem: scene hash (or param hash) plus seed."""
    if scene_h is None:
        blob = json.dumps(params or {}, sort_keys=True).encode()
        scene_h = hashlib.sha256(blob).hexdigest()
    return f"{scene_h[:12]}-s{seed}"


def _write_csv(outdir: str, name: str, header: list, rows) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _maybe_plot(args, draw, name: str, sidecars: list) -> None:
    """Render one SVG via matplotlib if requested and available."""
    if not getattr(args, "plot", False):
        return
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        sys.stderr.write("plot skipped: matplotlib is not installed\n")
        return
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    draw(ax)
    os.makedirs(args.outdir, exist_ok=True)
    path = os.path.join(args.outdir, name)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    sidecars.append(path)


def _base_record(command: str, config: dict) -> dict:
    config = dict(config)
    config["backend"] = "numba" if HAS_NUMBA else "numpy"
    return {"tool": "pbinv", "version": __version__, "command": command,
            "config": config, "sidecars": []}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_scenes(args, started: float) -> int:
    rows = []
    for entry in builtin_scenes():
        expected = (None if entry.expected_value is None
                    else _qty(entry.expected_value, 0.0))
        rows.append({
            "name": entry.name,
            "quantity": entry.quantity,
            "expected": expected,
            "provenance": entry.provenance,
            "regression_only": entry.regression_only,
            "surface": entry.surface.kind,
            "hash": scene_hash(entry.scene),
        })
    record = _base_record("scenes", {})
    record["results"] = {"scenes": rows}
    _emit(record, started)
    return 0


def _cmd_bracket(args, started: float) -> int:
    scene, scene_h = _scene_for(args)
    F, G, _ = _pair_for(scene, args.pair)
    rep = sup_norm(poisson_bracket(F, G), grid_n=args.grid)
    adm = check_admissible(F, G, scene, grid_n=args.grid)
    record = _base_record("bracket", {"grid_n": args.grid, "pair": args.pair})
    record["scene_hash"] = scene_h
    record["results"] = {
        "bracket_sup": _qty(rep.value, rep.margin),
        "argmax": [rep.argmax.p, rep.argmax.q],
        "admissible": adm["admissible"],
        "failures": adm["failures"],
    }
    _emit(record, started)
    return 0


def _cmd_certify(args, started: float) -> int:
    scene, scene_h = _scene_for(args)
    F, G, _ = _pair_for(scene, args.pair)
    cert = scene_lower_bound(F, G, scene, grid_n=args.grid,
                             n_path=args.path_n)
    record = _base_record("certify", {"grid_n": args.grid,
                                      "path_n": args.path_n,
                                      "pair": args.pair})
    record["scene_hash"] = scene_h
    record["results"] = {
        "certificate": _qty(cert.value, cert.error_budget),
        "region": cert.region,
        "area": _qty(cert.area, 0.0),
        "boundary_integral": _qty(cert.boundary_integral, cert.error_budget),
        "admissible": True,
    }
    _emit(record, started)
    return 0


def _dump_fields(pair: ConstructedPair, grid_n: int, outdir: str,
                 tag: str, sidecars: list) -> None:
    P, Q, _, _ = surface_mesh(pair.F.surface, grid_n)
    for name, fld in (("F", pair.F), ("G", pair.G)):
        V = fld.value(P, Q)
        rows = zip(P.ravel(), Q.ravel(), V.ravel())
        sidecars.append(_write_csv(outdir, f"{tag}-field-{name}.csv",
                                   ["p", "q", "value"], rows))


def _cmd_construct(args, started: float) -> int:
    family = args.family
    record = _base_record("construct", {"grid_n": args.grid})
    sidecars: list = []
    if family == "quad-pair":
        pair = quadrilateral_pair(args.A, args.B, args.beta, args.delta,
                                  pin_radius=args.pin)
    elif family == "phased-quad-pair":
        pair = phased_quad_pair(args.A, args.B, args.delta,
                                pin_radius=args.pin)
    elif family == "sphere-pair":
        pair = sphere_profile_pair(args.epsilon)
    elif family == "flow-average":
        H, G = linear_flow_average_inputs()
        pair = flow_average_function(H, G, args.b, grid_n=args.grid)
    elif family == "cutoff-map":
        T = triangle_cutoff_map(args.kappa)
        rng = np.random.Generator(np.random.Philox(args.seed))
        s = rng.uniform(-0.5, 1.5, 10_000)
        t = rng.uniform(-0.5, 1.5, 10_000)
        jac = float(np.max(np.abs(T.jacobian(s, t))))
        if jac > 1.0 + args.kappa:
            raise GuaranteeViolation(
                f"cutoff-map: sampled |Jacobian| {jac:.6g} exceeds "
                f"1 + kappa = {1.0 + args.kappa:.6g}")
        record["config"]["seed"] = args.seed
        record["results"] = {
            "kappa": _qty(args.kappa, 0.0),
            "delta": _qty(T.delta, 0.0),
            "K": _qty(T.K, 0.0),
            "jacobian_bound": _qty(T.jac_bound, 0.0),
            "jacobian_sampled_max": _qty(jac, 1e-6),
        }
        _emit(record, started)
        return 0
    else:
        raise UsageError(f"unknown construction family {family!r}")

    pair.raise_on_violation()
    rep = sup_norm(poisson_bracket(pair.F, pair.G), grid_n=args.grid)
    record["config"]["params"] = pair.params
    tag = _tag(None, 0, {"family": family, **pair.params})
    _dump_fields(pair, args.grid, args.outdir, tag, sidecars)
    record["sidecars"] = sidecars
    record["results"] = {
        "construction": pair.construction,
        "claims": _claims_block(pair),
        "bracket_sup": _qty(rep.value, rep.margin),
        "notes": pair.notes,
    }
    _emit(record, started)
    return 0


def _cmd_estimate(args, started: float) -> int:
    scene, scene_h = _scene_for(args)
    config = OptimizerConfig(grid_n=args.grid, restarts=args.restarts,
                             max_iters=args.iters, seed=args.seed)
    est = estimate_pb(scene, config)
    sidecars = []
    tag = _tag(scene_h, args.seed)
    if est.trace:
        rows = [(r["restart"], r["iter"], r["temperature"], r["objective"],
                 r["node_sup"], r["best_sup"]) for r in est.trace]
        sidecars.append(_write_csv(
            args.outdir, f"{tag}-trace.csv",
            ["restart", "iter", "temperature", "objective", "node_sup",
             "best_sup"], rows))

    def draw(ax):
        for k in sorted({r["restart"] for r in est.trace}):
            pts = [(r["iter"], r["best_sup"]) for r in est.trace
                   if r["restart"] == k]
            ax.semilogy([p[0] for p in pts], [p[1] for p in pts],
                        label=f"restart {k}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("best measured sup")
        ax.legend()

    if est.trace:
        _maybe_plot(args, draw, f"{tag}-convergence.svg", sidecars)
    results = {
        "upper_bound": _qty(est.upper_bound, est.measurement_margin),
        "admissible": est.admissible,
        "restart": est.restart,
        "iterations": est.iterations,
        "warnings": list(est.warnings),
    }
    if est.certificate is not None:
        results["certificate"] = _qty(est.certificate.value,
                                      est.certificate.error_budget)
        results["certificate_region"] = est.certificate.region
    record = _base_record("estimate", config.as_dict())
    record["scene_hash"] = scene_h
    record["sidecars"] = sidecars
    record["results"] = results
    _emit(record, started)
    return 0


def _cmd_profile(args, started: float) -> int:
    scene, scene_h = _scene_for(args)
    F, G, _ = _pair_for(scene, args.pair)
    b = sup_norm(poisson_bracket(F, G), grid_n=args.grid,
                 with_margin=False).value
    kind = scene.constraint.get("kind", "")
    base_kind = "F3" if kind.startswith("F3") else "F4"
    try:
        cert = scene_lower_bound(F, G, scene, grid_n=args.grid)
        p_cert = cert.value
    except UsageError:
        p_cert = 0.0
    candidates = []
    if scene.surface.kind == "round-sphere":
        for eps in (0.02, 0.05, 0.1):
            cpair = sphere_profile_pair(eps)
            candidates.append((cpair.F, cpair.G))
    if args.s:
        s_values = [parse_real(tok) for tok in args.s.split(",")]
    else:
        s_values = list(np.linspace(0.0, b, args.points))
    points = []
    for s in s_values:
        est = estimate_profile(F, G, float(s), candidates=candidates,
                               grid_n=args.grid)
        bounds = theoretical_profile_bounds(p_cert, b, float(s), base_kind) \
            if p_cert > 0 else None
        entry = {
            "s": _qty(s, 0.0),
            "rho_upper": _qty(est.rho_upper, est.distance_margin),
            "method": est.method,
            "candidate_bracket": _qty(est.candidate_bracket, 0.0),
        }
        if bounds is not None:
            entry["sandwich_lower"] = _qty(bounds.lower, 0.0)
            entry["sandwich_upper"] = _qty(bounds.upper, 0.0)
        points.append(entry)
    sidecars = []
    tag = _tag(scene_h, args.seed)
    rows = [(pt["s"]["value"], pt["rho_upper"]["value"],
             pt.get("sandwich_lower", {}).get("value", ""),
             pt.get("sandwich_upper", {}).get("value", ""),
             pt["method"]) for pt in points]
    sidecars.append(_write_csv(
        args.outdir, f"{tag}-profile.csv",
        ["s", "rho_upper", "sandwich_lower", "sandwich_upper", "method"],
        rows))

    def draw(ax):
        xs = [pt["s"]["value"] for pt in points]
        ax.plot(xs, [pt["rho_upper"]["value"] for pt in points],
                marker="o", label="rho_upper")
        if p_cert > 0:
            ax.plot(xs, [pt["sandwich_lower"]["value"] for pt in points],
                    ls="--", label="lower bound")
            ax.plot(xs, [pt["sandwich_upper"]["value"] for pt in points],
                    ls="--", label="upper bound")
        ax.set_xlabel("s")
        ax.set_ylabel("profile")
        ax.legend()

    _maybe_plot(args, draw, f"{tag}-profile.svg", sidecars)
    record = _base_record("profile", {"grid_n": args.grid, "pair": args.pair,
                                      "points": args.points, "seed": args.seed})
    record["scene_hash"] = scene_h
    record["sidecars"] = sidecars
    record["results"] = {
        "bracket": _qty(b, 0.0),
        "certificate": _qty(p_cert, 0.0),
        "class": base_kind,
        "points": points,
    }
    _emit(record, started)
    return 0


def _cmd_chords(args, started: float) -> int:
    scene, scene_h = _scene_for(args)
    F, G, _ = _pair_for(scene, args.hamiltonian)
    cls = scene.constraint
    try:
        X0 = scene.sets[cls["X0"]]
        X1 = scene.sets[cls["X1"]]
    except KeyError as exc:
        raise UsageError(
            "scene does not declare X0/X1 sets for a chord search") from exc
    chords = find_chords(G, X0, X1, horizon=args.horizon, seeds=args.seeds,
                         tol=args.tol, step=args.step)
    try:
        cert = scene_lower_bound(F, G, scene, grid_n=128)
        p_cert = cert.value
    except UsageError:
        p_cert = 0.0
    sidecars = []
    tag = _tag(scene_h, args.seeds)
    rows = [(c.start.p, c.start.q, c.end.p, c.end.q, c.T, c.tol)
            for c in chords]
    sidecars.append(_write_csv(
        args.outdir, f"{tag}-chords.csv",
        ["start_p", "start_q", "end_p", "end_q", "T", "tol"], rows))
    results = {"chords_found": len(chords), "certificate": _qty(p_cert, 0.0)}
    if chords:
        best = chords[0]
        results["min_time"] = _qty(best.time_length, best.tol)
        if p_cert > 0:
            results["duality_cap"] = _qty(1.0 / p_cert, 0.0)
    record = _base_record("chords", {
        "horizon": args.horizon, "seeds": args.seeds,
        "hamiltonian": args.hamiltonian,
        "tol": args.tol, "step": args.step})
    record["scene_hash"] = scene_h
    record["sidecars"] = sidecars
    record["results"] = results
    _emit(record, started)
    return 0


def _cmd_selftest(args, started: float) -> int:
    out = run_selftest(fast=args.fast)
    record = _base_record("selftest", {"fast": args.fast})
    record["results"] = out
    _emit(record, started)
    return 0 if out["passed"] else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_scene_args(sp) -> None:
    sp.add_argument("--scene", help="built-in scene name")
    sp.add_argument("--scene-file", help="path to a scene JSON file")


def _add_common(sp, grid_default: int = 256) -> None:
    sp.add_argument("--grid", type=int, default=grid_default,
                    help="evaluation grid resolution per axis")
    sp.add_argument("--outdir", default=".",
                    help="directory for CSV/SVG sidecars")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pbinv",
        description="Poisson-bracket invariants of subsets of symplectic "
                    "surfaces: scenes, measurements, certificates, optimizer "
                    "runs, chords, profiles.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--threads", type=int, default=None,
                    help="cap worker threads (default: PBINV_THREADS or "
                         "backend default)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("scenes", help="list bundled scenes")
    sp.set_defaults(fn=_cmd_scenes)

    sp = sub.add_parser("bracket", help="measure sup|{F,G}| of a scene pair")
    _add_scene_args(sp)
    _add_common(sp)
    sp.add_argument("--pair", default="construction", choices=PAIR_CHOICES)
    sp.set_defaults(fn=_cmd_bracket)

    sp = sub.add_parser("certify",
                        help="Stokes lower bound over the scene's regions")
    _add_scene_args(sp)
    _add_common(sp)
    sp.add_argument("--pair", default="construction", choices=PAIR_CHOICES)
    sp.add_argument("--path-n", type=int, default=2048,
                    help="boundary quadrature nodes")
    sp.set_defaults(fn=_cmd_certify)

    sp = sub.add_parser("construct",
                        help="build a documented construction and emit its "
                             "guarantees plus field grid dumps")
    sp.add_argument("family", choices=["quad-pair", "phased-quad-pair",
                                       "sphere-pair", "cutoff-map",
                                       "flow-average"])
    _add_common(sp, grid_default=128)
    sp.add_argument("--A", type=float, default=0.2)
    sp.add_argument("--B", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=0.99)
    sp.add_argument("--delta", type=float, default=0.01)
    sp.add_argument("--pin", type=float, default=0.0,
                    help="pin radius for the primed-class variants")
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--kappa", type=float, default=0.2)
    sp.add_argument("--b", type=float, default=2.0,
                    help="flow-average window length")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_construct)

    sp = sub.add_parser("estimate",
                        help="optimizer upper bound for a scene's pb value")
    _add_scene_args(sp)
    _add_common(sp, grid_default=128)
    sp.add_argument("--restarts", type=int, default=4)
    sp.add_argument("--iters", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--plot", action="store_true",
                    help="write a convergence SVG")
    sp.set_defaults(fn=_cmd_estimate)

    sp = sub.add_parser("profile",
                        help="profile function rho(s) sandwich for a pair")
    _add_scene_args(sp)
    _add_common(sp)
    sp.add_argument("--pair", default="construction", choices=PAIR_CHOICES)
    sp.add_argument("--points", type=int, default=10,
                    help="number of s samples in [0, bracket]")
    sp.add_argument("--s", help="comma-separated explicit s values")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--plot", action="store_true",
                    help="write a profile-curve SVG")
    sp.set_defaults(fn=_cmd_profile)

    sp = sub.add_parser("chords",
                        help="Hamiltonian chords between the scene's sets")
    _add_scene_args(sp)
    sp.add_argument("--outdir", default=".")
    sp.add_argument("--hamiltonian", default="construction",
                    choices=PAIR_CHOICES)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--seeds", type=int, default=64)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.set_defaults(fn=_cmd_chords)

    sp = sub.add_parser("selftest", help="run the condensed invariant suite")
    sp.add_argument("--fast", action="store_true",
                    help="skip the slower optimizer and integrator checks")
    sp.set_defaults(fn=_cmd_selftest)
    return ap


def dispatch(argv=None) -> int:
    """Parse argv, run one subcommand, print one record; returns exit code."""
    started = time.perf_counter()
    ap = build_parser()
    args = ap.parse_args(argv)
    set_threads(args.threads)
    try:
        return args.fn(args, started)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except SceneValidationError as exc:
        sys.stderr.write(f"scene validation failed: {exc}\n")
        return 3
    except GuaranteeViolation as exc:
        sys.stderr.write(f"guarantee violated: {exc}\n")
        return 4
    except PbinvError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main(argv=None) -> None:
    raise SystemExit(dispatch(argv))


if __name__ == "__main__":
    main()
