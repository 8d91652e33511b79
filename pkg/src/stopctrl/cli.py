"""Command line driver.

Subcommands
  solve        solve the variational inequality, write surface.csv
  boundaries   extract the free boundaries, write boundaries.csv
  osolve       solve the gradient's stopping problem, write gradient.csv
  simulate     Monte Carlo experiments (saddle / stopping / moments), JSON out
  diagnose     multi-resolution regularity report with figures
  plot         render figures from artifacts on disk (or a fresh solve)

Configuration is a JSON file with blocks model / grid / sim / diagnostics /
output; every field has a default, and validation errors name the offending
field (for example ``model.params.alpha0``). The effective configuration,
with defaults applied and command line overrides folded in, is hashed and
the hash embedded in every artifact, so mixing files from different runs is
detected. Reruns with the same configuration and seed reproduce every
artifact byte for byte.

Exit codes: 0 success, 1 configuration error, 2 standing-assumption
violation, 3 solver or topology fault, 4 artifact mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import artifacts, plots
from .boundaries import extract_boundaries
from .diagnostics import run_diagnostics
from .faults import ArtifactMismatch, AssumptionError, SolverFault, TopologyFault
from .grid import LatticeGrid, make_grid
from .model import (GameModel, catalog, catalog_param_names, default_window,
                    validate_assumptions)
from .os_solver import solve_vx_os
from .simulate import (PathBundle, moment_growth_experiment,
                       saddle_deviation_test, stopping_time_convergence)
from .vi_solver import residual_report, solve_vi

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSUMPTION = 2
EXIT_SOLVER = 3
EXIT_ARTIFACT = 4

_TOP_KEYS = {"model", "grid", "sim", "diagnostics", "output"}


def _fail(path: str, msg: str):
    raise ValueError(f"{path}: {msg}")


def _block(raw: dict, key: str) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        _fail(key, f"expected a mapping, got {type(val).__name__}")
    return val


def _check_unknown(block: dict, allowed, prefix: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        _fail(f"{prefix}{unknown[0]}", "unknown configuration field")


def _number(block: dict, key: str, default, prefix: str, *, minimum=None):
    val = block.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(f"{prefix}{key}", f"expected a number, got {type(val).__name__}")
    val = float(val)
    if minimum is not None and val < minimum:
        _fail(f"{prefix}{key}", f"must be >= {minimum}, got {val:g}")
    return val


def _integer(block: dict, key: str, default, prefix: str, *, minimum=None):
    val = block.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int):
        _fail(f"{prefix}{key}", f"expected an integer, got {type(val).__name__}")
    if minimum is not None and val < minimum:
        _fail(f"{prefix}{key}", f"must be >= {minimum}, got {val}")
    return int(val)


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ValueError("config root: expected a JSON object")
    return raw


@dataclass
class RunContext:
    model: GameModel
    grid: LatticeGrid
    eff: dict
    cfg_hash: str
    out_dir: str

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)


def build_context(raw: dict, args) -> RunContext:
    """Validate the raw config, apply defaults and CLI overrides, and
    freeze the effective configuration that every artifact is hashed to."""
    _check_unknown(raw, _TOP_KEYS, "")

    mblock = _block(raw, "model")
    _check_unknown(mblock, {"name", "params"}, "model.")
    name = mblock.get("name", "ou-quadratic")
    if not isinstance(name, str):
        _fail("model.name", f"expected a string, got {type(name).__name__}")
    params_raw = mblock.get("params", {})
    if not isinstance(params_raw, dict):
        _fail("model.params", f"expected a mapping, got {type(params_raw).__name__}")
    known = catalog_param_names(name)
    params = {}
    for key in sorted(params_raw):
        if key not in known:
            _fail(f"model.params.{key}", f"unknown parameter for catalog model {name!r}")
        val = params_raw[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            _fail(f"model.params.{key}", f"expected a number, got {type(val).__name__}")
        params[key] = float(val)
    model = catalog(name, params)

    gblock = _block(raw, "grid")
    _check_unknown(gblock, {"x_lo", "x_hi", "nx", "nt"}, "grid.")
    lo_default, hi_default = default_window(model)
    x_lo = _number(gblock, "x_lo", lo_default, "grid.")
    x_hi = _number(gblock, "x_hi", hi_default, "grid.")
    nx = _integer(gblock, "nx", 400, "grid.", minimum=8)
    nt = _integer(gblock, "nt", 400, "grid.", minimum=8)
    grid = make_grid(model, x_lo, x_hi, nx, nt)

    sblock = _block(raw, "sim")
    _check_unknown(sblock, {"n_paths", "dt_sim", "seed"}, "sim.")
    n_paths = _integer(sblock, "n_paths", 100_000, "sim.", minimum=1)
    dt_sim = _number(sblock, "dt_sim", model.T / 2000.0, "sim.", minimum=0.0)
    if dt_sim <= 0.0:
        _fail("sim.dt_sim", f"must be positive, got {dt_sim:g}")
    seed = _integer(sblock, "seed", 2024, "sim.", minimum=0)
    if args.seed is not None:
        seed = args.seed

    dblock = _block(raw, "diagnostics")
    _check_unknown(dblock, {"levels", "sim_paths", "dt_sim"}, "diagnostics.")
    levels = _integer(dblock, "levels", 2, "diagnostics.", minimum=1)
    if getattr(args, "levels", None) is not None:
        levels = args.levels
        if levels < 1:
            _fail("diagnostics.levels", f"must be >= 1, got {levels}")
    diag_paths = _integer(dblock, "sim_paths", 2000, "diagnostics.", minimum=1)
    diag_dt = dblock.get("dt_sim", None)
    if diag_dt is not None:
        diag_dt = _number(dblock, "dt_sim", None, "diagnostics.")
        if diag_dt <= 0.0:
            _fail("diagnostics.dt_sim", f"must be positive, got {diag_dt:g}")
    else:
        diag_dt = model.T / 400.0

    oblock = _block(raw, "output")
    _check_unknown(oblock, {"directory", "figures"}, "output.")
    out_dir = oblock.get("directory", "out")
    if not isinstance(out_dir, str):
        _fail("output.directory", f"expected a string, got {type(out_dir).__name__}")
    figures = oblock.get("figures", True)
    if not isinstance(figures, bool):
        _fail("output.figures", f"expected a boolean, got {type(figures).__name__}")
    if args.out is not None:
        out_dir = args.out

    eff = {
        "model": {"name": name, "params": params},
        "grid": {"x_lo": grid.x_lo, "x_hi": grid.x_hi, "nx": grid.nx, "nt": grid.nt},
        "sim": {"n_paths": n_paths, "dt_sim": dt_sim, "seed": seed},
        "diagnostics": {"levels": levels, "sim_paths": diag_paths, "dt_sim": diag_dt},
        "output": {"directory": out_dir, "figures": figures},
    }
    return RunContext(model=model, grid=grid, eff=eff,
                      cfg_hash=artifacts.config_hash(eff), out_dir=out_dir)


def _ensure_out(ctx: RunContext) -> None:
    os.makedirs(ctx.out_dir, exist_ok=True)


def _bundle(ctx: RunContext) -> PathBundle:
    sim = ctx.eff["sim"]
    n_steps = max(int(round(ctx.model.T / sim["dt_sim"])), 1)
    return PathBundle(master_seed=sim["seed"], n_paths=sim["n_paths"],
                      n_steps=n_steps, dt_sim=sim["dt_sim"])


def _fb_dict(fb) -> dict:
    return {"t": fb.t, "a": fb.a, "b": fb.b,
            "a_defined": fb.a_defined, "b_defined": fb.b_defined}


def _solve_meta(ctx: RunContext, screen, surf=None) -> dict:
    grid = ctx.grid
    meta = {
        "config_hash": ctx.cfg_hash,
        "model": ctx.model.name,
        "grid": {"nx": grid.nx, "nt": grid.nt, "x_lo": grid.x_lo,
                 "x_hi": grid.x_hi, "dx": grid.dx, "dt": grid.dt},
        "assumptions": screen.to_dict(),
    }
    if surf is not None:
        meta["tolerances"] = {"tol_solve": surf.tol_solve,
                              "tol_contact": surf.tol_contact,
                              "tol_grad": surf.tol_grad}
        meta["solver"] = {"scheme": surf.scheme,
                          "iterations_max": int(surf.iters.max()),
                          "iterations_total": int(surf.iters.sum()),
                          "last_update_sup": float(surf.deltas.max())}
        meta["residuals"] = residual_report(surf)
    return meta


def cmd_solve(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    screen = validate_assumptions(ctx.model, ctx.grid)
    mpath = ctx.path("solve_meta.json")
    if not screen.hard_pass:
        # still leave a metadata record of what failed the screen
        artifacts.write_json(mpath, _solve_meta(ctx, screen))
        print(f"wrote {mpath}")
        raise AssumptionError(screen)
    surf = solve_vi(ctx.model, ctx.grid, check_assumptions=False)
    path = ctx.path("surface.csv")
    artifacts.write_surface_csv(path, surf, ctx.cfg_hash)
    artifacts.write_json(mpath, _solve_meta(ctx, screen, surf))
    rep = residual_report(surf)
    print(f"wrote {path}")
    print(f"wrote {mpath}")
    print(f"interior pde residual sup {rep['interior_pde']:.3e}; "
          f"second-form defect sup {rep['second_form_defect']:.3e}")
    return EXIT_OK


def cmd_boundaries(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    surf = solve_vi(ctx.model, ctx.grid)
    fb = extract_boundaries(surf)
    path = ctx.path("boundaries.csv")
    artifacts.write_boundaries_csv(path, fb, ctx.cfg_hash)
    print(f"wrote {path}")
    print(f"stop boundary defined on {int(fb.a_defined.sum())} of {fb.t.size} levels; "
          f"action boundary on {int(fb.b_defined.sum())}")
    return EXIT_OK


def cmd_osolve(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    surf = solve_vi(ctx.model, ctx.grid)
    fb = extract_boundaries(surf)
    oss = solve_vx_os(ctx.model, ctx.grid, fb)
    path = ctx.path("gradient.csv")
    artifacts.write_gradient_csv(path, oss, ctx.cfg_hash)
    gap = float(np.abs(surf.dplus - oss.u).max())
    print(f"wrote {path}")
    print(f"sup |gradient - stopping value| on grid {gap:.3e}")
    return EXIT_OK


def cmd_simulate(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    surf = solve_vi(ctx.model, ctx.grid)
    fb = extract_boundaries(surf)
    bundle = _bundle(ctx)
    model = ctx.model

    if args.experiment == "saddle":
        rep = saddle_deviation_test(model, 0.0, model.x_ref, fb, bundle)
        rep.config_hash = ctx.cfg_hash
        path = ctx.path("mc.json")
        artifacts.write_json(path, rep.to_dict())
        print(f"wrote {path}")
        print(f"saddle estimate {rep.estimate:.6f} +- {rep.stderr:.6f} "
              f"({rep.n_paths} paths, {len(rep.rows)} deviations)")
    elif args.experiment == "stopping":
        table = stopping_time_convergence(model, fb, (0.0, model.x_ref), bundle)
        table["config_hash"] = ctx.cfg_hash
        path = ctx.path("stopping.json")
        artifacts.write_json(path, table)
        print(f"wrote {path}")
    else:
        table = moment_growth_experiment(model, 0.0, fb, bundle)
        table["config_hash"] = ctx.cfg_hash
        path = ctx.path("moments.json")
        artifacts.write_json(path, table)
        print(f"wrote {path}")
        print(f"control growth exponent {table['slope_nu']}; "
              f"supremum growth exponent {table['slope_sup']}")
    return EXIT_OK


def cmd_diagnose(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    diag = ctx.eff["diagnostics"]
    report = run_diagnostics(ctx.model, ctx.grid, diag["levels"],
                             master_seed=ctx.eff["sim"]["seed"],
                             sim_paths=diag["sim_paths"], dt_sim=diag["dt_sim"])
    rpath = ctx.path("report.json")
    artifacts.write_json(rpath, {"config_hash": ctx.cfg_hash,
                                 "entries": report.to_obj()})
    surf, fb, oss = report.surfaces[-1], report.fbs[-1], report.os_surfaces[-1]
    artifacts.write_surface_csv(ctx.path("surface.csv"), surf, ctx.cfg_hash)
    artifacts.write_boundaries_csv(ctx.path("boundaries.csv"), fb, ctx.cfg_hash)
    artifacts.write_gradient_csv(ctx.path("gradient.csv"), oss, ctx.cfg_hash)
    wrote = [rpath, ctx.path("surface.csv"), ctx.path("boundaries.csv"),
             ctx.path("gradient.csv")]
    if ctx.eff["output"]["figures"]:
        grid = surf.grid
        plots.plot_value_heatmap(grid.t_nodes(), grid.x_nodes(), surf.v,
                                 surf.region, _fb_dict(fb),
                                 ctx.path("value_surface.svg"))
        plots.plot_boundaries(_fb_dict(fb), ctx.path("boundaries.svg"))
        plots.plot_convergence(report.to_obj(), ctx.path("convergence.svg"))
        wrote += [ctx.path("value_surface.svg"), ctx.path("boundaries.svg"),
                  ctx.path("convergence.svg")]
    for p in wrote:
        print(f"wrote {p}")
    n_fail = len(report.failures)
    n_na = sum(1 for e in report.entries if e["pass"] is None)
    print(f"checks: {len(report.entries)} total, {n_fail} failing, "
          f"{n_na} not applicable")
    return EXIT_OK


def cmd_plot(ctx: RunContext, args) -> int:
    _ensure_out(ctx)
    spath, bpath = ctx.path("surface.csv"), ctx.path("boundaries.csv")
    if os.path.exists(spath) and os.path.exists(bpath):
        sdata = artifacts.read_surface_csv(spath)
        bdata = artifacts.read_boundaries_csv(bpath)
        artifacts.check_hash(spath, sdata["config_hash"], ctx.cfg_hash)
        artifacts.check_hash(bpath, bdata["config_hash"], ctx.cfg_hash)
        t, x, v, region = sdata["t"], sdata["x"], sdata["v"], sdata["region"]
        bnd = bdata
    else:
        surf = solve_vi(ctx.model, ctx.grid)
        fb = extract_boundaries(surf)
        t, x = ctx.grid.t_nodes(), ctx.grid.x_nodes()
        v, region = surf.v, surf.region
        bnd = _fb_dict(fb)
    plots.plot_value_heatmap(t, x, v, region, bnd, ctx.path("value_surface.svg"))
    plots.plot_boundaries(bnd, ctx.path("boundaries.svg"))
    print(f"wrote {ctx.path('value_surface.svg')}")
    print(f"wrote {ctx.path('boundaries.svg')}")
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "boundaries": cmd_boundaries,
    "osolve": cmd_osolve,
    "simulate": cmd_simulate,
    "diagnose": cmd_diagnose,
    "plot": cmd_plot,
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON configuration file")
    common.add_argument("--out", default=None, help="output directory override")
    common.add_argument("--seed", type=int, default=None,
                        help="Monte Carlo master seed override")

    p = argparse.ArgumentParser(
        prog="stopctrl",
        description="stopper vs. singular-controller game: solve, extract, "
                    "simulate, diagnose")
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve the variational inequality")
    sub.add_parser("boundaries", parents=[common],
                   help="extract the free boundaries")
    sub.add_parser("osolve", parents=[common],
                   help="solve the gradient's optimal stopping problem")
    sim = sub.add_parser("simulate", parents=[common],
                         help="Monte Carlo experiments")
    sim.add_argument("--experiment", choices=("saddle", "stopping", "moments"),
                     default="saddle")
    diag = sub.add_parser("diagnose", parents=[common],
                          help="multi-resolution regularity report")
    diag.add_argument("--levels", type=int, default=None,
                      help="number of refinement levels")
    sub.add_parser("plot", parents=[common], help="render figures")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        ctx = build_context(raw, args)
        return _COMMANDS[args.cmd](ctx, args)
    except AssumptionError as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SolverFault, TopologyFault) as exc:
        print(f"solver fault: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ArtifactMismatch as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
