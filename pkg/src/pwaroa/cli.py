"""Command-line entry point: ``pwaroa certify|bounds|plot|validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .certifier import CERTIFIED, CertificationResult, UndeclaredEquilibrium, run, validate_roa
from .config import ConfigError, load_config
from .lp import NumericalFailure
from .lyapunov import OutsideDomain
from .plotting import plot_figures
from .report import RunReport, build_report, num, write_metrics_csv
from .systems import OracleUnavailable
from .uncertainty import InconsistentData, evaluate_bounds

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2


def _point(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x1,x2 got '{text}'") from None
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 2 components, got {len(vals)}")
    return vals


def cmd_certify(args) -> int:
    spec = load_config(args.config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run(spec.certifier, spec.oracle, spec.initial_data())
    total = time.perf_counter() - t0
    ds = spec.oracle.name if spec.dataset is not None else None
    rep = build_report(result, spec.system, ds, timings=args.timings, total_seconds=total)
    rep.write(out / "report.json")
    write_metrics_csv(result, out / "metrics.csv")
    plot_figures(rep, out)
    last = result.history[-1] if result.history else None
    print(f"status: {result.terminated}")
    if result.roa is not None:
        print(f"alpha: {num(result.roa.alpha)}")
        print(f"max V on target: {num(result.roa.max_on_target)}")
    if last is not None:
        print(f"iterations: {last.iteration}  N_d: {last.N_d}  N_c: {last.N_c}  N_v: {last.N_v}")
    if result.message:
        print(f"note: {result.message}")
    print(f"wrote {out / 'report.json'}, {out / 'tessellation.svg'}, {out / 'lyapunov.svg'}, {out / 'metrics.csv'}")
    return EXIT_OK if result.terminated == CERTIFIED else EXIT_UNCERTIFIED


def cmd_bounds(args) -> int:
    spec = load_config(args.config)
    data = spec.initial_data()
    x = args.at
    if not spec.certifier.X.contains(x):
        X = spec.certifier.X
        raise OutsideDomain(f"x = {x} lies outside the domain [{X.lower}, {X.upper}]")
    box = evaluate_bounds(x, data)
    for k, (lo, hi) in enumerate(zip(box.lower, box.upper), start=1):
        print(f"f{k}: [{num(lo)}, {num(hi)}]")
    return EXIT_OK


def cmd_plot(args) -> int:
    rep = RunReport.read(args.report)
    for p in plot_figures(rep, args.output):
        print(f"wrote {p}")
    return EXIT_OK


def cmd_validate(args) -> int:
    spec = load_config(args.config)
    rep = RunReport.read(args.report)
    V, roa = rep.lyapunov_function(), rep.certified_roa()
    if V is None or roa is None:
        print(f"error: {args.report} holds no certified region", file=sys.stderr)
        return EXIT_ERROR
    if not spec.oracle.closed_form:
        print("error: validation needs a closed-form system, not a dataset", file=sys.stderr)
        return EXIT_ERROR
    result = CertificationResult(rep.terminated, V, roa, [], None, spec.certifier, rep.message)
    v = validate_roa(spec.oracle, result, samples=args.samples, seed=args.seed)
    print(f"samples: {v.samples}")
    print(f"stayed in X: {v.stayed_in_X:.4f}")
    print(f"reached A: {v.reached_A:.4f}")
    print(f"V non-increasing: {v.monotone:.4f}")
    print(f"passed: {v.passed:.4f}")
    print(f"worst relative increase: {v.worst_increase:.3e}")
    if args.json:
        Path(args.json).write_text(
            json.dumps({"samples": v.samples, "passed": v.passed, "failures": v.failures}, indent=1) + "\n"
        )
    return EXIT_OK if v.passed >= args.threshold else EXIT_UNCERTIFIED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwaroa", description="Data-driven region-of-attraction certification.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-iteration progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="run the certification loop")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--timings", action="store_true", help="record wall-clock times in report.json")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bounds", help="print the vector-field interval at a point")
    p.add_argument("config")
    p.add_argument("--at", type=_point, required=True, metavar="X1,X2")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plot", help="render figures from a report")
    p.add_argument("report")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="simulate trajectories from a certified region")
    p.add_argument("config")
    p.add_argument("report")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.99, help="pass fraction for exit 0")
    p.add_argument("--json", help="also write the summary to this file")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, OutsideDomain, OracleUnavailable, UndeclaredEquilibrium, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except InconsistentData as exc:
        print(f"error: inconsistent data: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
