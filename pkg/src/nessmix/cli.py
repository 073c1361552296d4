"""Command-line front end (``nessmix``).

Exit codes: 0 success (all checks pass), 1 a verification check failed,
2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from typing import Iterable, List, Optional

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, NessMixError, NumericError
from .ness import EquilibriumMarginal, MixtureSpec, estimate_covariance, estimate_profile, sample_many
from .sampling import RngHandle
from .transition import first_marginal, numeric_support
from .verification import (
    TupleGrid,
    check_marginal_reversal,
    check_normalization,
    check_scale_invariance,
    check_separability,
    check_shift_invariance,
    check_symmetry,
    check_two_sided_markov,
    ResidualReport,
    site_marginal,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SUITES = ("markov", "symmetry", "invariance", "support", "all")

log = logging.getLogger("nessmix")


def _fmt_log(v: float) -> str:
    if v == -math.inf:
        return "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.6f}"


def _fmt_value(v: float) -> str:
    return repr(float(v))


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _read_lines(path: str) -> List[str]:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path!r}: {exc.strerror}") from None
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _parse_row(line: str, width: Optional[int], lineno: int):
    tokens = [t.strip() for t in line.split(",")]
    if width is not None and len(tokens) != width:
        raise ConfigError(f"line {lineno}: expected {width} values, got {len(tokens)}")
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ConfigError(f"line {lineno}: not a list of numbers: {line!r}") from None
    return tokens, values


def _require(args, name):
    if getattr(args, name) is None:
        raise ConfigError(f"--{name.replace('_', '-')} is required for {args.command}")
    return getattr(args, name)


# -- subcommands ---------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    family = cfgmod.build_family(cfg)
    rows = [_parse_row(ln, cfg.n, k + 1) for k, ln in enumerate(_read_lines(_require(args, "points")))]
    a, b = cfg.boundary
    values = np.array([r[1] for r in rows], dtype=float).reshape(len(rows), cfg.n)
    logs = family.log_joint(cfg.n, a, b, values) if rows else np.zeros(0)
    with _output(args.out) as out:
        out.write(",".join([f"theta_{i}" for i in range(1, cfg.n + 1)] + ["log_density"]) + "\n")
        for (tokens, _), v in zip(rows, np.atleast_1d(logs)):
            out.write(",".join(tokens + [_fmt_log(float(v))]) + "\n")
    return EXIT_OK


def cmd_marginal(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    family = cfgmod.build_family(cfg)
    site = args.site
    if not 1 <= site <= cfg.n:
        raise ConfigError(f"--site must be in 1..{cfg.n}, got {site}")
    rows = [_parse_row(ln, 1, k + 1) for k, ln in enumerate(_read_lines(_require(args, "points")))]
    x = np.array([r[1][0] for r in rows], dtype=float)
    fn = site_marginal(family, cfg.n, site, cfg.boundary_pair(), args.method, cfg.quad)
    logs = np.atleast_1d(fn(x)) if rows else np.zeros(0)
    with _output(args.out) as out:
        out.write("x,log_density\n")
        for (tokens, _), v in zip(rows, logs):
            out.write(",".join(tokens + [_fmt_log(float(v))]) + "\n")
    return EXIT_OK


def cmd_build(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    if not cfg.recursion:
        raise ConfigError(f"build needs a kernel family, got {cfg.kind!r}")
    start = time.perf_counter()
    family = cfgmod.build_family(cfg)
    elapsed = time.perf_counter() - start
    factors = family.factors
    a, b = cfg.boundary
    levels = []
    for n, cache in enumerate(factors.caches, start=1):
        levels.append({
            "level": n,
            "degree": list(cache.degree),
            "tail": cache.tail,
            "log_f_at_boundary": float(factors.log_f(n, a, b)),
        })
    report = {"config": cfg.to_dict(), "diagonal_exponent": factors.sigma,
              "build_seconds": round(elapsed, 3), "levels": levels}
    with _output(args.out) as out:
        json.dump(report, out, indent=2)
        out.write("\n")
    return EXIT_OK


def _mixture(cfg, family, ness: bool) -> MixtureSpec:
    marginal = EquilibriumMarginal(cfg.marginal if ness else "dirac")
    return MixtureSpec(family, cfg.boundary_pair(), cfg.n, marginal, cfg.quad)


def _seed(args, cfg):
    return cfg.seed if args.seed is None else args.seed


def cmd_sample(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    family = cfgmod.build_family(cfg)
    count = args.count if args.count is not None else 1
    cfg.seed = _seed(args, cfg)
    data = sample_many(_mixture(cfg, family, args.ness), RngHandle(cfg.seed), count,
                       jobs=args.jobs)
    prefix = "x" if args.ness else "theta"
    with _output(args.out) as out:
        out.write(",".join(f"{prefix}_{i}" for i in range(1, cfg.n + 1)) + "\n")
        for row in data:
            out.write(",".join(_fmt_value(v) for v in row) + "\n")
    return EXIT_OK


def cmd_ness(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    family = cfgmod.build_family(cfg)
    count = args.count if args.count is not None else 100000
    cfg.seed = _seed(args, cfg)
    spec = _mixture(cfg, family, True)
    rng = RngHandle(cfg.seed)
    streams = rng.split(2)
    profile = estimate_profile(spec, count, streams[0], jobs=args.jobs)
    cov = estimate_covariance(spec, max(count, 1000), streams[1], jobs=args.jobs)
    report = {"config": cfg.to_dict(), "profile": profile.to_dict(), "covariance": cov.to_dict()}
    with _output(args.out) as out:
        json.dump(report, out, indent=2)
        out.write("\n")
    return EXIT_OK


def _grid_for(n: int) -> TupleGrid:
    per_axis = max(2, min(8, int(4096 ** (1.0 / n) + 1e-9)))
    return TupleGrid(per_axis)


def support_report(family, n: int, boundary, grid_size: int = 1024, threshold: float = 0.0,
                   quad=None) -> ResidualReport:
    """Distance (in grid cells) between the numeric support of ``Λ^{k,1}`` and ``I_{a,b}``, k ≤ n."""
    iv = boundary.interval
    h = iv.width / grid_size
    worst, where = 0.0, None
    for k in range(1, n + 1):
        est = numeric_support(first_marginal(family, k, boundary, quad), threshold, grid_size)
        gap = max(est.lo - iv.lo, iv.hi - est.hi) / h
        if gap >= worst:
            worst, where = gap, {"level": k, "support": [est.lo, est.hi]}
    return ResidualReport("support", float(worst), 2.0, where,
                          {"kind": "cell midpoints", "grid_size": grid_size, "threshold": threshold},
                          {"family": family.describe(), "n": n})


def run_suite(cfg, family, suite: str) -> List[ResidualReport]:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}")
    tol = 1e-5 if cfg.recursion else 1e-8
    method = "operators" if cfg.recursion else "family"
    boundary = cfg.boundary_pair()
    n = cfg.n
    grid = _grid_for(n)
    reports = []
    if suite in ("markov", "all"):
        if n >= 2:
            reports.append(check_two_sided_markov(family, n, boundary, grid, tol, method, cfg.quad))
            reports.append(check_separability(family, n, boundary, grid, tol))
        reports.append(check_normalization(family, n, boundary, 1e-7, cfg.quad))
    if suite in ("symmetry", "all"):
        reports.append(check_symmetry(family, n, boundary, grid, max(tol, 1e-10)))
        reports.append(check_marginal_reversal(family, n, boundary, grid, tol, method, cfg.quad))
    if suite in ("invariance", "all"):
        a, b = boundary
        for gamma in (0.5, 2.0):
            reports.append(check_scale_invariance(family, n, gamma, boundary, grid, tol))
        width = abs(b - a)
        for gamma in (0.5 * width, width):
            reports.append(check_shift_invariance(family, n, gamma, boundary, grid, tol))
    if suite in ("support", "all"):
        reports.append(support_report(family, n, boundary, quad=cfg.quad))
    return reports


def cmd_verify(args) -> int:
    cfg = cfgmod.load(_require(args, "config"))
    family = cfgmod.build_family(cfg)
    reports = run_suite(cfg, family, args.suite)
    resolved = cfg.to_dict()
    payload = []
    for rep in reports:
        d = rep.to_dict()
        d["config"] = resolved
        payload.append(d)
    with _output(args.out) as out:
        json.dump(payload, out, indent=2)
        out.write("\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


# -- entry point ----------------------------------------------------------------

COMMANDS = {
    "eval": cmd_eval,
    "marginal": cmd_marginal,
    "build": cmd_build,
    "sample": cmd_sample,
    "verify": cmd_verify,
    "ness": cmd_ness,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nessmix",
        description="Ordered mixture densities: evaluate, build, sample, verify.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False, count=False, jobs=False):
        p.add_argument("--config", metavar="FILE", help="JSON family configuration")
        p.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
        if seed:
            p.add_argument("--seed", type=int, help="override the configured seed")
        if count:
            p.add_argument("--count", type=int, help="number of samples")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker threads")
        return p

    p = common(sub.add_parser("eval", help="joint log-density at points (CSV)"))
    p.add_argument("--points", metavar="FILE", help='one tuple per line, "-" for stdin')
    p = common(sub.add_parser("marginal", help="site marginal log-density at points (CSV)"))
    p.add_argument("--points", metavar="FILE", help='one value per line, "-" for stdin')
    p.add_argument("--site", type=int, default=1)
    p.add_argument("--method", choices=("family", "operators"), default="family")
    common(sub.add_parser("build", help="build a kernel family and report its caches (JSON)"))
    p = common(sub.add_parser("sample", help="sample hidden tuples or configurations (CSV)"),
               seed=True, count=True, jobs=True)
    p.add_argument("--ness", action="store_true", help="emit configurations x_i ~ nu(theta_i)")
    p = common(sub.add_parser("verify", help="run a verification suite (JSON)"))
    p.add_argument("--suite", choices=SUITES, default="all")
    common(sub.add_parser("ness", help="profile and covariance estimates (JSON)"),
           seed=True, count=True, jobs=True)
    return parser


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        if getattr(args, "count", None) is not None and args.count < 1:
            raise ConfigError("--count must be >= 1")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"nessmix: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"nessmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NessMixError as exc:
        print(f"nessmix: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
