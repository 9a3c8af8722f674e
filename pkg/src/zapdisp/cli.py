"""Command-line entry point: ``zapdisp <command> [--config FILE] ...``.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .diagnostics import (compare_micro_macro, defect_residual, shape_check)
from .errors import ConfigError, InvalidArgument, NumericalError, ZapdispError
from .kernel import moment_exists
from .macro import MacroField, macro_series
from .micro import MicroGrid, MicroRun, MicroSolver, initial_condition
from .particles import McConfig, fit_rates, histogram, simulate, write_stats_csv
from .polynomial import YPolynomial
from .profile import build_cross_section, cross_mean
from .slow_manifold import block_operator, derive, zero_eigenspace

log = logging.getLogger("zapdisp")

OUTPUT_ENV = "ZAPDISP_OUTPUT_DIR"
COMMANDS = ("derive", "micro", "mc", "macro", "residual", "compare", "all")


class Context:
    """Config plus lazily computed, shared stage results."""

    def __init__(self, cfg: cfgmod.RunConfig, out: Path, threads: int = 1):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.hash = cfg.config_hash()
        self.cs = build_cross_section(cfg.grid.n_nodes)
        self.kernel = cfg.jump_kernel()
        self._sm = None
        self._micro = None
        self._solver = None

    @property
    def header(self) -> list[str]:
        return [f"config_hash={self.hash}", f"seed={self.cfg.mc.seed}"]

    def stamp(self, doc: dict) -> dict:
        doc = dict(doc)
        doc["config_hash"] = self.hash
        doc["seed"] = self.cfg.mc.seed
        doc["config"] = self.cfg.to_dict()
        return doc

    def slow_manifold(self):
        if self._sm is None:
            order, method = self.cfg.derive.order, self.cfg.derive.method
            if method == "eigenspace":
                self._sm = zero_eigenspace(block_operator(self.kernel, order, self.cs), self.cs)
            else:
                self._sm = derive(self.kernel, order, self.cs)
        return self._sm

    @property
    def grid(self) -> MicroGrid:
        g = self.cfg.grid
        return MicroGrid(float(g.L), int(g.nx), self.cs, g.boundary)

    def solver(self) -> MicroSolver:
        if self._solver is None:
            self._solver = MicroSolver(self.grid, self.kernel, threads=self.threads)
        return self._solver

    def initial(self):
        m = self.cfg.micro
        y_shape = YPolynomial([cfgmod._rational(c, "micro.y_shape") for c in m.y_shape]) \
            if m.y_shape else None
        return initial_condition(m.ic, self.grid, x0=m.x0, sigma=m.sigma, y_shape=y_shape)

    def micro_times(self) -> list[float]:
        m = self.cfg.micro
        times = sorted(set(float(t) for t in m.output_times) | {float(m.t_end)}
                       | {float(t) for t in self.cfg.residual.times})
        return [t for t in times if t <= m.t_end]

    def micro_run(self) -> MicroRun:
        if self._micro is None:
            self._micro = self.solver().run(self.initial(), self.cfg.micro.dt,
                                            output_times=self.micro_times())
        return self._micro


def _write_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], columns: list[str], rows):
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# -- stages ---------------------------------------------------------------------

def cmd_derive(ctx: Context) -> dict:
    sm = ctx.slow_manifold()
    doc = sm.to_json()
    for n, a in enumerate(sm.A, start=1):
        doc[f"A{n}"] = doc["A"][f"A{n}"]
    doc["profile"] = ctx.kernel.profile.describe()
    doc["kernel"] = ctx.kernel.describe()
    residuals = sm.hierarchy_residuals(ctx.kernel)
    doc["validation"] = {
        "hierarchy_residual": [str(r) if sm.exact else float(r) for r in residuals],
        "third_moment_exists": moment_exists(3, ctx.kernel, ctx.cs).ok,
    }
    doc = ctx.stamp(doc)
    _write_json(ctx.out / "derive.json", doc)
    return doc


def cmd_micro(ctx: Context) -> dict:
    run = ctx.micro_run()
    grid = run.grid
    x, ys = grid.x, ctx.cs.nodes

    def rows():
        for snap in run.snapshots:
            for i in range(grid.nx):
                for j in range(grid.cs.n_nodes):
                    yield (snap.t, x[i], ys[j], snap.values[i, j])

    _write_csv(ctx.out / "micro.csv", ctx.header, ["t", "x", "y", "u"], rows())
    doc = ctx.stamp({"snapshots": run.summary(), "warnings": run.warnings,
                     "boundary_note": f"{grid.boundary} x-boundary (artifact choice)"})
    _write_json(ctx.out / "micro_summary.json", doc)
    return doc


def cmd_mc(ctx: Context) -> dict:
    m = ctx.cfg.mc
    mc = McConfig(int(m.n_particles), int(m.seed), tuple(float(t) for t in m.t_outputs),
                  y0=m.y0)
    stats = simulate(mc, ctx.kernel.profile, threads=ctx.threads)
    write_stats_csv(stats, ctx.out / "mc_stats.csv", ctx.header)
    fit = fit_rates(stats, m.fit_t_min, m.fit_t_max)
    sm = ctx.slow_manifold()
    A = sm.A_float()
    doc = {
        "drift": fit.drift, "se_drift": fit.se_drift,
        "var_rate": fit.var_rate, "se_var_rate": fit.se_var_rate,
        "t_window": list(fit.t_window),
        "expected_drift": -A[0],
    }
    if len(A) > 1:
        doc["expected_var_rate"] = 2 * A[1]
        doc["z_var_rate"] = (fit.var_rate - 2 * A[1]) / fit.se_var_rate
    doc["z_drift"] = (fit.drift + A[0]) / fit.se_drift
    if m.histogram:
        t_last = float(stats.times[-1])
        hist = histogram(stats, t_last, m.x_bins, m.y_bins)
        xc = 0.5 * (hist.x_edges[1:] + hist.x_edges[:-1])
        yc = 0.5 * (hist.y_edges[1:] + hist.y_edges[:-1])
        _write_csv(ctx.out / "mc_histogram.csv", ctx.header, ["t", "x", "y", "density"],
                   ((t_last, xc[i], yc[j], hist.density[i, j])
                    for i in range(len(xc)) for j in range(len(yc))))
    doc = ctx.stamp(doc)
    _write_json(ctx.out / "mc_fit.json", doc)
    return doc


def _macro(ctx: Context):
    sm = ctx.slow_manifold()
    if sm.order < 2:
        raise InvalidArgument("the macro solver needs derive.order >= 2")
    A1, A2 = float(sm.A[0]), float(sm.A[1])
    u0 = ctx.initial()
    U0 = MacroField(cross_mean(u0.values, ctx.cs), 0.0, ctx.grid.L)
    return macro_series(A1, A2, U0, ctx.micro_times(), ctx.cfg.macro.method, ctx.cfg.macro.dt)


def cmd_macro(ctx: Context) -> dict:
    series = _macro(ctx)
    x = ctx.grid.x
    _write_csv(ctx.out / "macro.csv", ctx.header, ["t", "x", "U"],
               ((f.t, x[i], f.values[i]) for f in series for i in range(len(x))))
    doc = ctx.stamp({"method": ctx.cfg.macro.method, "times": [f.t for f in series],
                     "mass": [float(ctx.grid.h * np.sum(f.values) * 2) for f in series]})
    _write_json(ctx.out / "macro_summary.json", doc)
    return doc


def cmd_residual(ctx: Context) -> dict:
    run = ctx.micro_run()
    sm = ctx.slow_manifold()
    rows, reports = [], []
    for t in ctx.cfg.residual.times:
        snap = run.at(float(t))
        res = defect_residual(snap, sm, ctx.solver())
        shape = shape_check(snap, sm, run.grid)
        summary = res.summary()
        summary["consistency"] = res.consistency()
        summary["shape_relative"] = shape.relative
        summary["pre_emergent"] = shape.pre_emergent
        reports.append(summary)
        rows.extend(zip([res.t] * len(res.x), res.x, res.U, res.U_t, res.U_x, res.U_xx, res.rho))
    _write_csv(ctx.out / "residual.csv", ctx.header,
               ["t", "x", "U", "U_t", "U_x", "U_xx", "rho"], rows)
    doc = ctx.stamp({"residuals": reports})
    _write_json(ctx.out / "residual.json", doc)
    return doc


def cmd_compare(ctx: Context) -> dict:
    report = compare_micro_macro(ctx.micro_run(), _macro(ctx))
    _write_csv(ctx.out / "compare.csv", ctx.header, ["t", "rel_l2", "rel_inf"],
               zip(report.times, report.rel_l2, report.rel_inf))
    doc = ctx.stamp(report.summary())
    _write_json(ctx.out / "compare.json", doc)
    return doc


STAGES = {"derive": cmd_derive, "micro": cmd_micro, "mc": cmd_mc, "macro": cmd_macro,
          "residual": cmd_residual, "compare": cmd_compare}


def cmd_all(ctx: Context) -> dict:
    manifest = {"config_hash": ctx.hash, "seed": ctx.cfg.mc.seed, "stages": []}
    results = {}
    try:
        for name in ("derive", "micro", "mc", "macro", "residual", "compare"):
            manifest["stages"].append({"stage": name, "status": "running"})
            results[name] = STAGES[name](ctx)
            manifest["stages"][-1]["status"] = "ok"
    except Exception as exc:
        manifest["stages"][-1]["status"] = "failed"
        manifest["stages"][-1]["error"] = f"{type(exc).__name__}: {exc}"
        manifest["status"] = "failed"
        _write_json(ctx.out / "MANIFEST.json", manifest)
        raise
    manifest["status"] = "ok"
    report = {
        "A": results["derive"]["A"],
        "mc": {k: results["mc"][k] for k in ("drift", "se_drift", "var_rate", "se_var_rate")},
        "compare_worst_l2": results["compare"]["worst_l2"],
        "residuals": results["residual"]["residuals"],
    }
    _write_json(ctx.out / "report.json", ctx.stamp(report))
    _write_json(ctx.out / "MANIFEST.json", manifest)
    return report


# -- argument handling ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zapdisp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", help="TOML run configuration")
        p.add_argument("--preset", default="paper", choices=sorted(cfgmod.PRESETS),
                       help="base configuration (default: paper)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one key, e.g. micro.dt=0.025")
        p.add_argument("--out", "-o", help=f"output directory (default: ${OUTPUT_ENV} or ./zapdisp-out)")
        p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        p.add_argument("--quiet", action="store_true")
    return parser


def resolve_config(args) -> cfgmod.RunConfig:
    if args.config:
        cfg = cfgmod.load(args.config, base=args.preset)
    else:
        cfg = cfgmod.preset(args.preset)
    if args.overrides:
        cfg = cfgmod.apply_overrides(cfg, args.overrides)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(args.out or cfg.output_dir or os.environ.get(OUTPUT_ENV) or "zapdisp-out")
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out, threads=max(1, args.threads))
        fn = cmd_all if args.command == "all" else STAGES[args.command]
        doc = fn(ctx)
    except (ConfigError, InvalidArgument) as exc:
        parser.print_usage(sys.stderr)
        print(f"zapdisp: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ZapdispError, FloatingPointError) as exc:
        print(f"zapdisp: numerical failure: {exc}", file=sys.stderr)
        return 1
    if args.command == "derive":
        print(json.dumps({k: v for k, v in doc.items() if k != "config"}, indent=2, sort_keys=True))
    elif not args.quiet:
        print(f"wrote {args.command} outputs to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
