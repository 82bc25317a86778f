"""Command-line driver: run solves, compare them, export artifacts.

A run is described by a flat config dict.  Every key has a default below;
a JSON file supplied with ``--config`` overrides the defaults, and explicit
command-line flags override both.  The report printed to stdout (and
written to ``report.json`` under ``--export-dir``) is a single JSON
document with a fixed key set, so downstream tooling can parse it without
scraping.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .analysis import error_report, export_field, trace_trajectory
from .decomp import make_static_decomposition, solve_dd, solve_single
from .grid import ConfigurationError, NodeField
from .patchy import PatchyConfig, run_patchy
from .problems import PRESET_NAMES, preset
from .runtime import METHOD1, METHOD2, SERIAL, ExecutionStrategy, RunStats
from .solver import DIRICHLET, STATE_CONSTRAINT, SolverConfig

DEFAULTS = {
    "problem": "eikonal2d",     # preset name
    "coarse_nodes": 51,         # per-axis nodes of the guidance grid
    "fine_nodes": 101,          # per-axis nodes of the solve grid
    "patches": 4,               # patch / subdomain count R
    "controls": None,           # control-set size (None = preset default)
    "tol": 1.0e-6,              # sweep convergence tolerance
    "method": "patchy",         # single | dd | patchy | both
    "bc": "sc",                 # sc | dirichlet (patch boundary handling)
    "addons": [],               # subset of {a1, a2, a3}
    "reduction_factor": 4.0,    # cone factor r used when a3 is on
    "workers": 1,               # worker threads
    "strategy": "serial",       # serial | m1 | m2
    "export_dir": None,         # write artifacts here when set
    "trace": None,              # start point [x1, ..., xd] for a trajectory
    "seed": None,               # reserved; all algorithms are deterministic
}

_METHODS = ("single", "dd", "patchy", "both")
_BC = {"sc": STATE_CONSTRAINT, "dirichlet": DIRICHLET}
_STRATEGIES = {"serial": SERIAL, "m1": METHOD1, "m2": METHOD2}
_ADDONS = ("a1", "a2", "a3")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="patchyhjb",
        description="Minimum-time HJB solves with dynamics-driven "
                    "domain decomposition.",
    )
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--problem", choices=PRESET_NAMES)
    p.add_argument("--coarse-nodes", type=int, dest="coarse_nodes")
    p.add_argument("--fine-nodes", type=int, dest="fine_nodes")
    p.add_argument("--patches", type=int)
    p.add_argument("--controls", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--method", choices=_METHODS)
    p.add_argument("--bc", choices=tuple(_BC))
    p.add_argument("--addons", help="comma list from a1,a2,a3")
    p.add_argument("--reduction-factor", type=float, dest="reduction_factor")
    p.add_argument("--workers", type=int)
    p.add_argument("--strategy", choices=tuple(_STRATEGIES))
    p.add_argument("--export-dir", dest="export_dir")
    p.add_argument("--trace", help="comma list of start coordinates")
    p.add_argument("--seed", type=int)
    return p


def merge_config(args: argparse.Namespace) -> dict:
    """Defaults <- config file <- explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if isinstance(cfg["addons"], str):
        cfg["addons"] = [a for a in cfg["addons"].split(",") if a]
    if isinstance(cfg["trace"], str):
        try:
            cfg["trace"] = [float(t) for t in cfg["trace"].split(",")]
        except ValueError as exc:
            raise ConfigurationError(f"bad --trace value: {exc}") from exc
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["problem"] not in PRESET_NAMES:
        raise ConfigurationError(f"unknown problem {cfg['problem']!r}")
    if cfg["method"] not in _METHODS:
        raise ConfigurationError(f"unknown method {cfg['method']!r}")
    if cfg["bc"] not in _BC:
        raise ConfigurationError(f"unknown bc {cfg['bc']!r}")
    if cfg["strategy"] not in _STRATEGIES:
        raise ConfigurationError(f"unknown strategy {cfg['strategy']!r}")
    bad = [a for a in cfg["addons"] if a not in _ADDONS]
    if bad:
        raise ConfigurationError(f"unknown addons {bad}")
    if cfg["tol"] <= 0:
        raise ConfigurationError("tol must be positive")


def run_experiment(cfg: dict) -> dict:
    """Execute the configured pipeline(s) and return the report dict."""
    _validate(cfg)
    spec = preset(cfg["problem"], controls=cfg["controls"])
    solver_cfg = SolverConfig(tol=cfg["tol"], bc_mode=_BC[cfg["bc"]])
    strategy = ExecutionStrategy(_STRATEGIES[cfg["strategy"]],
                                 cfg["workers"])
    fine_grid = spec.make_grid(cfg["fine_nodes"])
    method = cfg["method"]

    stats = RunStats()
    warnings: list[str] = []
    value: NodeField | None = None
    dd_value: NodeField | None = None
    patch_map = None

    if method in ("patchy", "both"):
        pcfg = PatchyConfig(
            n_patches=cfg["patches"],
            coarse_nodes=cfg["coarse_nodes"],
            fine_nodes=cfg["fine_nodes"],
            bc_mode=_BC[cfg["bc"]],
            warm_start="a1" in cfg["addons"],
            order_by_value="a2" in cfg["addons"],
            reduction=cfg["reduction_factor"] if "a3" in cfg["addons"]
            else None,
        )
        result = run_patchy(spec, pcfg, solver_cfg, strategy)
        value = result.value
        patch_map = result.patch_map
        stats = result.stats
        warnings.extend(stats.warnings)
    if method in ("dd", "both"):
        with stats.phase("dd_reference"):
            decomp = make_static_decomposition(fine_grid, cfg["patches"])
            dd_value, dd_stats = solve_dd(
                spec, fine_grid, decomp, solver_cfg, strategy)
        stats.merge_counts(dd_stats)
        if dd_stats.warning:
            warnings.append(dd_stats.warning)
        if method == "dd":
            value = dd_value
            dd_value = None
    if method == "single":
        with stats.phase("solve"):
            value, single_stats = solve_single(
                spec, fine_grid, cfg=solver_cfg, strategy=strategy)
        stats.merge_counts(single_stats)
        if single_stats.warning:
            warnings.append(single_stats.warning)

    errors: dict = {}
    if dd_value is not None:
        errors["vs_dd"] = error_report(value, dd_value).as_dict()
    if spec.exact_solution is not None:
        pts = fine_grid.interior_points()
        exact = np.asarray(spec.exact_solution(pts))
        errors["vs_exact"] = error_report(
            value, exact, against="exact").as_dict()

    trace_info = None
    trajectory = None
    if cfg["trace"] is not None:
        trajectory = trace_trajectory(value, spec, cfg["trace"])
        trace_info = {"termination": trajectory.termination,
                      "steps": trajectory.n_steps,
                      "length": trajectory.length}

    report = {
        "problem": cfg["problem"],
        "dims": spec.dim,
        "coarse_nodes": cfg["coarse_nodes"],
        "fine_nodes": cfg["fine_nodes"],
        "R": cfg["patches"],
        "Nc": len(spec.control_set),
        "bc": cfg["bc"],
        "addons": list(cfg["addons"]),
        "tol": cfg["tol"],
        "workers": cfg["workers"],
        "strategy": cfg["strategy"],
        "phases": stats.phases_ms(),
        "counters": {"relaxations": stats.node_relaxations,
                     "candidate_evals": stats.candidate_evals},
        "errors": errors,
        "warnings": warnings,
    }
    if trace_info is not None:
        report["trace"] = trace_info

    if cfg["export_dir"] is not None:
        _write_artifacts(cfg["export_dir"], report, value, dd_value,
                         patch_map, trajectory)
    return report


def _write_artifacts(outdir, report, value, dd_value, patch_map,
                     trajectory) -> None:
    os.makedirs(outdir, exist_ok=True)
    export_field(value, os.path.join(outdir, "value.csv"), "csv")
    export_field(value, os.path.join(outdir, "value.vtk"), "vtk")
    if dd_value is not None:
        export_field(dd_value, os.path.join(outdir, "reference_dd.csv"),
                     "csv")
    if patch_map is not None:
        export_field(patch_map, os.path.join(outdir, "patches.csv"), "csv")
        export_field(patch_map, os.path.join(outdir, "patches.vtk"), "vtk")
    if trajectory is not None:
        header = ",".join(f"x{i + 1}"
                          for i in range(trajectory.points.shape[1]))
        np.savetxt(os.path.join(outdir, "trajectory.csv"),
                   trajectory.points, fmt="%.9g", delimiter=",",
                   header=header, comments="")
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def emit_report(report: dict) -> str:
    return json.dumps(report, indent=2)


def parse_report(text: str) -> dict:
    return json.loads(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = merge_config(args)
        report = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    report["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(emit_report(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
