"""Batch command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 inequality violation, 10 infinite-bound verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .bounds import total_bound
from .errors import ConfigError, DivergentTerm1, InfiniteLevel, NumericalError
from .extremal import build_density, verify_increment_condition, verify_sup_identity
from .orlicz import conjugate
from .partition import build_partition
from .sobolev import PROBES, corpus, run_corpus

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VIOLATION = 4
EXIT_INFINITE = 10


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def cmd_conjugate(cfg: cfgmod.RunConfig) -> int:
    """Table of x, phi(x), psi(x) (numeric conjugate) and phi(x) + psi(x) - x^2."""
    phi = cfg.phi_fn
    psi = conjugate(phi, numeric=True)
    xs = np.logspace(math.log10(cfg.x_min), math.log10(cfg.x_max), cfg.points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "phi", "psi", "young_gap"])
    for x in xs:
        fx, px = float(phi(x)), float(psi(x))
        w.writerow([_g(x), _g(fx), _g(px), _g(fx + px - x * x)])
    path = _write(Path(cfg.out_dir), "conjugate.csv", buf.getvalue())
    print(f"wrote {path}")
    return EXIT_OK


def _partition(cfg: cfgmod.RunConfig):
    return build_partition(cfg.space, cfg.modulus_fn, k_max=cfg.k_max, r_min=cfg.r_min)


def cmd_partition(cfg: cfgmod.RunConfig) -> int:
    part = _partition(cfg)
    path = _write(Path(cfg.out_dir), "partition.csv", part.to_csv())
    if part.terminal_m is not None:
        print(f"terminal_m = {part.terminal_m}")
    else:
        print(f"truncated after {part.levels} levels")
    print(f"wrote {path}")
    return EXIT_OK


def _report(cfg: cfgmod.RunConfig):
    part = _partition(cfg)
    return total_bound(cfg.space, cfg.modulus_fn, cfg.phi_fn, part, quad_tol=cfg.quad_tol,
                       root_tol=cfg.root_tol, jobs=cfg.jobs)


def cmd_bounds(cfg: cfgmod.RunConfig) -> int:
    report = _report(cfg)
    out = Path(cfg.out_dir)
    _write(out, "bounds.csv", report.to_csv())
    _write(out, "bounds.json", report.to_json())
    if not report.finite:
        print("verdict: infinite")
        return EXIT_INFINITE
    print(f"verdict: finite, sum = {_g(report.sum)}, lower bound = {_g(report.lower_bound)}")
    return EXIT_OK


def cmd_simulate(cfg: cfgmod.RunConfig) -> int:
    space, modulus, phi = cfg.space, cfg.modulus_fn, cfg.phi_fn
    report = _report(cfg)
    try:
        density = build_density(space, modulus, phi, report, terminal_delta=cfg.terminal_delta)
    except InfiniteLevel as exc:
        print(f"density undefined: {exc}")
        return EXIT_INFINITE
    inc = verify_increment_condition(density, space, modulus, phi, cfg.pair_count, cfg.mc_count,
                                     cfg.seed, shards=cfg.shards, jobs=cfg.jobs)
    sup = verify_sup_identity(density, space, modulus, cfg.grid_count, cfg.sup_mc_count, cfg.seed)
    sup_ok = sup.max_deviation <= 1e-8 * max(sup.target, 1e-300)
    out = Path(cfg.out_dir)
    _write(out, "increments.csv", inc.to_csv())
    _write(out, "sup_identity.json", sup.to_json({
        "identity_holds": sup_ok,
        "increment_max": inc.max_estimate,
        "increment_stderr": inc.stderr,
        "increment_holds": inc.passed,
    }))
    print(f"increment max {_g(inc.max_estimate)} +- {_g(inc.stderr)}; "
          f"sup deviation {_g(sup.max_deviation)}")
    return EXIT_OK if inc.passed and sup_ok else EXIT_VIOLATION


def cmd_verify_sobolev(cfg: cfgmod.RunConfig) -> int:
    space, phi = cfg.space, cfg.phi_fn
    probes = tuple(np.logspace(-1.0, 1.0, cfg.probes)) if cfg.probes != len(PROBES) else PROBES
    result = run_corpus(space, phi, corpus(space, cfg.seed), probes, probes,
                        grid_count=cfg.sobolev_grid_count, mc_count=cfg.sobolev_mc_count,
                        seed=cfg.seed, shards=cfg.shards, jobs=cfg.jobs)
    _write(Path(cfg.out_dir), "sobolev.csv", result.to_csv())
    bad = result.violations
    print(f"{len(result.checks)} checks, {result.vacuous} vacuous, {len(bad)} violations")
    return EXIT_VIOLATION if bad else EXIT_OK


HELP = {
    "conjugate": "tabulate phi, its numeric conjugate and the Young gap",
    "partition": "build the level partition of the radius range",
    "bounds": "solve every level constant and report the two-sided envelope",
    "simulate": "build the extremal process and check its increment and sup properties",
    "verify-sobolev": "check the Sobolev-type oscillation bound on the test corpus",
}

COMMANDS = {
    "conjugate": cmd_conjugate,
    "partition": cmd_partition,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "verify-sobolev": cmd_verify_sobolev,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [section] key = value settings")
    common.add_argument("--out", help="output directory (overrides output.out_dir)")
    common.add_argument("--seed", type=int, help="overrides sampling.seed")
    common.add_argument("--jobs", type=int, help="overrides sampling.jobs")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one setting; repeatable")
    parser = argparse.ArgumentParser(prog="orlicz-bounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    return parser


def resolve_config(args: argparse.Namespace) -> cfgmod.RunConfig:
    overrides = list(args.set)
    if args.out is not None:
        overrides.append(f"output.out_dir={args.out}")
    if args.seed is not None:
        overrides.append(f"sampling.seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"sampling.jobs={args.jobs}")
    return cfgmod.load(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "show-config":
        sys.stdout.write(cfgmod.serialize(cfg))
        return EXIT_OK
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergentTerm1 as exc:
        print(f"vacuous: {exc}", file=sys.stderr)
        return EXIT_INFINITE
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
