"""Command-line entry point: ``pcpsense {simulate,estimate,calibrate,verify}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .config import load_config
from .errors import (
    CovarianceCollapseError, InsufficientDataError, IntegrationDivergedError,
    InvalidParameterError, ParseError,
)
from .io import iter_samples, read_truth
from .pipeline import calibrate, estimate_stream, simulate, summarize, write_simulation
from .verify import run_verify

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="pcpsense", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML run configuration")
        return sp

    s = common(sub.add_parser("simulate", help="generate measurement and truth CSV"))
    s.add_argument("--out", type=Path, required=True, help="measurement CSV to write")
    s.add_argument("--truth", type=Path, help="truth CSV to write")
    s.add_argument("--seed", type=int, help="RNG seed (overrides [scenario] seed)")

    e = common(sub.add_parser("estimate", help="run the soft sensor on a measurement CSV"))
    e.add_argument("--in", dest="inp", type=Path, required=True)
    e.add_argument("--out", type=Path, required=True, help="estimate CSV to write")
    e.add_argument("--truth", type=Path, help="truth CSV for the error summary")

    c = common(sub.add_parser("calibrate", help="estimate the pressure-angle offset"))
    c.add_argument("--in", dest="inp", type=Path, required=True)
    c.add_argument("--truth", type=Path, required=True)
    c.add_argument("--out", type=Path, help="write the result as TOML")

    v = common(sub.add_parser("verify", help="run the property suites"))
    v.add_argument("--out", type=Path, help="write the report here as well")
    v.add_argument("--seed", type=int, help="accepted for symmetry; suites use fixed seeds")
    v.add_argument("--full", action="store_true", help="longer runs")
    return p


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8")


def _diag_paths(out: Path):
    return out.with_name(out.stem + "_pll.csv"), out.with_name(out.stem + "_ekf.csv")


def cmd_simulate(args, cfg):
    if args.seed is not None and args.seed < 0:
        raise InvalidParameterError("seed", "must be nonnegative")
    res = simulate(cfg, args.seed)
    with _open_out(args.out) as fm:
        if args.truth is not None:
            with _open_out(args.truth) as ft:
                write_simulation(res, fm, ft)
        else:
            write_simulation(res, fm)
    return EXIT_OK


def cmd_estimate(args, cfg):
    truth = None
    if args.truth is not None:
        with open(args.truth, newline="", encoding="utf-8") as fh:
            truth = read_truth(fh)
    pll_out = ekf_out = None
    with open(args.inp, newline="", encoding="utf-8") as fin, _open_out(args.out) as fout:
        if cfg.estimator.diagnostics:
            pp, ep = _diag_paths(args.out)
            pll_out, ekf_out = _open_out(pp), _open_out(ep)
        stats = {}
        try:
            series = estimate_stream(cfg, iter_samples(fin), out=fout, truth=truth,
                                     pll_out=pll_out, ekf_out=ekf_out,
                                     keep=truth is not None, stats=stats)
        finally:
            for fh in (pll_out, ekf_out):
                if fh is not None:
                    fh.close()
    print(json.dumps(summarize(stats, cfg, series, truth), indent=2))
    return EXIT_OK


def cmd_calibrate(args, cfg):
    with open(args.truth, newline="", encoding="utf-8") as fh:
        truth = read_truth(fh)
    with open(args.inp, newline="", encoding="utf-8") as fh:
        samples = list(iter_samples(fh))
    cal = calibrate(cfg, samples, truth)
    text = (f"[pll]\ntheta_off_deg = {math.degrees(cal.theta_off)!r}\n"
            f"# circular std {math.degrees(cal.circular_std):.4f} deg over {cal.n} locked samples\n")
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args, cfg):
    results = run_verify(cfg, quick=not args.full)
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out is not None:
        args.out.write_text(report, encoding="utf-8")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate,
            "calibrate": cmd_calibrate, "verify": cmd_verify}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (IntegrationDivergedError, CovarianceCollapseError) as exc:
        at = getattr(exc, "sample_t", None)
        where = f" (sample t={at!r})" if at is not None else ""
        print(f"error: divergence: {exc}{where}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InvalidParameterError, ParseError, InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
