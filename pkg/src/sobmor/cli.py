"""Command line front end: ``reduce``, ``compare`` and ``sample``.

Options may also come from a ``key = value`` config file (``--config``);
command line flags take precedence. Exit status is 0 on success, 1 for
usage or validation errors and 2 for numerical failures.
"""

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .baselines import balanced_truncation, ph_bt, ph_irka, so_bt
from .benchmarks import msd_ph_chain, triple_chain_sso
from .driver import INIT_METHODS, GammaSchedule, ReductionReport, sobmor_reduce
from .exceptions import NumericalFailureError, SingularPencilError, StructureError, StructureMismatchError
from .metrics import (
    PH_EXTRAS,
    SSO_EXTRAS,
    GridSpec,
    error_curve,
    h2_error,
    hinf_error,
    make_grid,
    sample_fom,
    seed_sample_cache,
    to_state_space,
    write_error_curve,
)
from .models import PHModel, SSOModel
from .optimizer import OptimOptions
from .param import STRUCTURES
from .validation import check_model, check_order

log = logging.getLogger("sobmor")

METHODS = ("sobmor", "bt", "ph-bt", "ph-irka", "so-bt")
BUILTINS = ("msd", "triple-chain")
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

DEFAULTS = {
    "model": None,
    "cells": None,
    "manifest": None,
    "method": "sobmor",
    "methods": None,
    "r": None,
    "structure": None,
    "grid_lo": 1e-4,
    "grid_hi": 1e3,
    "grid_count": None,
    "verify_factor": 10,
    "schedule": "fixed",
    "gamma_hi": 1e-1,
    "gamma_lo": 1e-14,
    "gamma_count": 300,
    "epsilon": 1e-14,
    "eps1": 1e-3,
    "eps2": 1e-14,
    "init": "greedy",
    "seed": 0,
    "max_iters": 2000,
    "samples": None,
    "out": None,
}
_INTS = {"cells", "grid_count", "verify_factor", "gamma_count", "seed", "max_iters"}
_FLOATS = {"grid_lo", "grid_hi", "gamma_hi", "gamma_lo", "epsilon", "eps1", "eps2"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="sobmor", description="Structure-preserving model order reduction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="key = value file; flags override its entries")
        p.add_argument("--model", choices=BUILTINS, default=S, help="built-in benchmark")
        p.add_argument("--cells", type=int, default=S, help="benchmark size (masses per chain)")
        p.add_argument("--manifest", default=S, help="model manifest file instead of --model")
        p.add_argument("--structure", choices=STRUCTURES, default=S)
        p.add_argument("--grid-lo", type=float, default=S)
        p.add_argument("--grid-hi", type=float, default=S)
        p.add_argument("--grid-count", type=int, default=S)
        p.add_argument("--out", default=S, help="output directory (file for sample)")

    def reducer(p):
        p.add_argument("--r", default=S, help="reduced order; compare also takes a:b[:step] or a,b,c")
        p.add_argument("--verify-factor", type=int, default=S)
        p.add_argument("--schedule", choices=("fixed", "bisection"), default=S)
        p.add_argument("--gamma-hi", type=float, default=S)
        p.add_argument("--gamma-lo", type=float, default=S)
        p.add_argument("--gamma-count", type=int, default=S)
        p.add_argument("--epsilon", type=float, default=S)
        p.add_argument("--eps1", type=float, default=S)
        p.add_argument("--eps2", type=float, default=S)
        p.add_argument("--init", choices=INIT_METHODS, default=S)
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--max-iters", type=int, default=S)
        p.add_argument("--samples", default=S, help="cached full-order samples written by 'sample'")

    p = sub.add_parser("reduce", help="reduce one model and write ROM, error curve and report")
    common(p)
    reducer(p)
    p.add_argument("--method", choices=METHODS, default=S)
    p = sub.add_parser("compare", help="tabulate errors and runtimes of several methods over r")
    common(p)
    reducer(p)
    p.add_argument("--methods", default=S, help="comma-separated method list")
    p = sub.add_parser("sample", help="sample the full-order transfer function on the grid")
    common(p)
    return parser


def resolve_config(args):
    """Merge defaults, the config file and flags (in increasing precedence)."""
    cfg = dict(DEFAULTS)
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose")}
    if getattr(args, "config", None):
        try:
            raw = io.read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        for key, val in raw.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{args.config}: unknown key {key!r}")
            cfg[key] = val
    cfg.update(flags)
    for key in _INTS:
        if cfg[key] is not None:
            cfg[key] = _convert(int, key, cfg[key])
    for key in _FLOATS:
        cfg[key] = _convert(float, key, cfg[key])
    cfg["command"] = args.command
    return cfg


def _convert(kind, key, val):
    try:
        return kind(val)
    except (TypeError, ValueError):
        raise UsageError(f"option {key} expects {kind.__name__}, got {val!r}") from None


def parse_orders(text):
    """``"8"``, ``"4,6,8"`` or ``"4:20:2"`` (inclusive) to a list of ints."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(t) for t in text.split(":")]
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] < 1):
                raise ValueError
            step = parts[2] if len(parts) == 3 else 1
            orders = list(range(parts[0], parts[1] + 1, step))
        else:
            orders = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse reduced order(s) {text!r}") from None
    if not orders or min(orders) < 1:
        raise UsageError("reduced orders must be positive")
    return orders


def load_model(cfg):
    has_builtin, has_manifest = cfg["model"] is not None, cfg["manifest"] is not None
    if has_builtin == has_manifest:
        raise UsageError("give exactly one of --model or --manifest")
    if has_manifest:
        return io.read_model(cfg["manifest"])
    if cfg["cells"] is None:
        raise UsageError("--cells is required with --model")
    if cfg["model"] == "msd":
        return msd_ph_chain(cfg["cells"])
    return triple_chain_sso(cfg["cells"])


def _structure(cfg, fom):
    if cfg["structure"] is not None:
        return cfg["structure"]
    if isinstance(fom, PHModel):
        return "ph"
    if isinstance(fom, SSOModel):
        return "sso"
    raise UsageError("--structure is required for unstructured models")


def grid_spec(cfg, structure):
    ph = structure == "ph"
    count = cfg["grid_count"] or (800 if ph else 300)
    return GridSpec(cfg["grid_lo"], cfg["grid_hi"], count, PH_EXTRAS if ph else SSO_EXTRAS)


def _schedule(cfg):
    if cfg["schedule"] == "bisection":
        return GammaSchedule.bisection(None, cfg["eps1"], cfg["eps2"])
    return GammaSchedule.fixed(cfg["gamma_hi"], cfg["gamma_lo"], cfg["gamma_count"], cfg["epsilon"])


def _load_samples(cfg, fom, grid):
    if cfg["samples"] is None:
        return
    cached = io.read_samples(cfg["samples"])
    if not np.array_equal(cached.omegas, make_grid(grid).omegas):
        raise UsageError(f"{cfg['samples']} was sampled on a different grid")
    seed_sample_cache(fom, cached)


def run_method(method, fom, r, cfg, structure, grid):
    """Reduce with one method; returns ``(rom, report)``."""
    t0 = time.perf_counter()
    if method == "sobmor":
        report = sobmor_reduce(
            fom,
            r,
            structure=structure,
            grid=grid,
            schedule=_schedule(cfg),
            init=cfg["init"],
            opts=OptimOptions(max_iters=cfg["max_iters"]),
            seed=cfg["seed"],
            verify_factor=0,
            compute_h2=False,
            callback=lambda rec: log.info(
                "gamma %.3e loss %.3e iterations %d", rec.gamma, rec.loss, rec.iterations
            ),
        )
        return report.rom, report
    if method == "bt":
        rom = balanced_truncation(to_state_space(fom), r)[0]
    elif method == "ph-bt":
        rom = ph_bt(check_model(fom, "ph"), r)
    elif method == "ph-irka":
        rom = ph_irka(check_model(fom, "ph"), r)
    else:
        rom = so_bt(check_model(fom, "sso"), r)
    report = ReductionReport([], None, "none", init_method="none", rom=rom)
    report.runtime_seconds = time.perf_counter() - t0
    return rom, report


def _errors(fom, rom, dense, report):
    report.hinf_estimate, report.hinf_omega = hinf_error(fom, rom, dense)
    try:
        report.h2_error = h2_error(fom, rom)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        report.notes.append(f"H2 error unavailable: {exc}")


def _out_dir(cfg):
    if cfg["out"] is None:
        raise UsageError("--out is required")
    return io.ensure_dir(cfg["out"])


def cmd_reduce(cfg):
    fom = load_model(cfg)
    if cfg["r"] is None:
        raise UsageError("--r is required")
    r = check_order(_convert(int, "r", cfg["r"]), fom.order)
    method = cfg["method"]
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    structure = _structure(cfg, fom)
    grid = grid_spec(cfg, structure)
    out = _out_dir(cfg)
    _load_samples(cfg, fom, grid)
    rom, report = run_method(method, fom, r, cfg, structure, grid)
    dense = sample_fom(fom, make_grid(grid.densified(cfg["verify_factor"])))
    _errors(fom, rom, dense, report)
    manifest = io.write_model(rom, out, "rom")
    io.read_model(manifest, validate=True)
    write_error_curve(out / "error_curve.csv", dense.omegas, error_curve(fom, rom, dense.omegas, dense.values))
    io.write_report(out / "report.txt", report, {"method": method, "r": r, "structure": structure})
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_compare(cfg):
    fom = load_model(cfg)
    if cfg["r"] is None:
        raise UsageError("--r is required")
    orders = [check_order(r, fom.order) for r in parse_orders(cfg["r"])]
    methods = [m.strip() for m in (cfg["methods"] or cfg["method"]).split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}")
    structure = _structure(cfg, fom)
    grid = grid_spec(cfg, structure)
    out = _out_dir(cfg)
    _load_samples(cfg, fom, grid)
    dense = sample_fom(fom, make_grid(grid.densified(cfg["verify_factor"])))
    with open(out / "compare.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "method", "hinf_estimate", "h2_error", "runtime_seconds"])
        for r in orders:
            for method in methods:
                rom, report = run_method(method, fom, r, cfg, structure, grid)
                io.read_model(io.write_model(rom, out / "roms", f"{method}_r{r}"), validate=True)
                _errors(fom, rom, dense, report)
                h2 = "nan" if report.h2_error is None else io.fmt(report.h2_error)
                writer.writerow([r, method, io.fmt(report.hinf_estimate), h2, io.fmt(report.runtime_seconds)])
                fh.flush()
                log.info("r=%d %s hinf=%.3e", r, method, report.hinf_estimate)
    return EXIT_OK


def cmd_sample(cfg):
    fom = load_model(cfg)
    grid = make_grid(grid_spec(cfg, _structure(cfg, fom)))
    if cfg["out"] is None:
        raise UsageError("--out is required")
    path = Path(cfg["out"])
    if path.exists():
        cached = io.read_samples(path)
        if np.array_equal(cached.omegas, grid.omegas) and cached.values.shape[1:] == (
            fom.n_outputs,
            fom.n_inputs,
        ):
            log.info("reusing %s", path)
            return EXIT_OK
    io.write_samples(path, sample_fom(fom, grid))
    return EXIT_OK


COMMANDS = {"reduce": cmd_reduce, "compare": cmd_compare, "sample": cmd_sample}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, StructureMismatchError, io.FormatError, TypeError, OSError) as exc:
        print(f"sobmor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailureError, SingularPencilError, StructureError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sobmor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"sobmor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
