"""Command-line interface.

Exit codes: 0 on a completed run (whatever the decision), 2 for unreadable or
malformed input data, 3 for invalid configurations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time

from . import streams
from .io import read_csv
from .permutation import DEFAULT_ALPHA, DEFAULT_B, ConfigError, PermutationPlan, asymptotic_test, run_test
from .simulate import WORST_CASE, estimate_power, scenario_pmf, worst_case_pmf
from .statistics import Method
from .tables import InputError

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3

CURVE_COLUMNS = ["scenario", "method", "n", "B", "alpha", "reps", "power", "se", "seed"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _method_list(text):
    try:
        return [Method(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown method in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discreteci", description="Conditional independence tests for discrete data.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    methods = [m.value for m in Method]

    def common(p, scenario_sizes=False):
        p.add_argument("--calibration", choices=["permutation", "asymptotic"], default="permutation")
        p.add_argument("--B", type=_positive_int, default=DEFAULT_B, help="number of permutations")
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
        p.add_argument("--seed", type=int, default=None, help="master seed (default: OS entropy, echoed)")
        p.add_argument("--workers", type=_positive_int, default=None, help=f"default: ${streams.WORKERS_ENV} or 1")
        p.add_argument("--output", help="write to this file instead of stdout")
        p.add_argument("--l1", type=_positive_int, default=20 if scenario_sizes else None)
        p.add_argument("--l2", type=_positive_int, default=20 if scenario_sizes else None)
        p.add_argument("--d", type=_positive_int, default=10 if scenario_sizes else None)

    t = sub.add_parser("test", help="test a CSV dataset")
    t.add_argument("--input", required=True, help="CSV with header x,y,z or x,y,z,count")
    t.add_argument("--method", choices=methods, default="uci")
    t.add_argument("--format", choices=["json", "csv"], default="json")
    common(t)

    s = sub.add_parser("simulate", help="estimate power on a scenario")
    s.add_argument("--scenario", required=True, help=f"1..8 or {WORST_CASE}")
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--method", choices=methods, default="uci")
    s.add_argument("--reps", type=_positive_int, default=1000)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--timing", action="store_true", help="add wall-clock seconds to the output")
    common(s, scenario_sizes=True)

    c = sub.add_parser("power-curve", help="power over several sample sizes and methods (CSV)")
    c.add_argument("--scenario", required=True, help=f"1..8 or {WORST_CASE}")
    c.add_argument("--n", type=_int_list, required=True, help="comma-separated sample sizes")
    c.add_argument("--methods", type=_method_list, default=[Method.UCI, Method.WUCI, Method.CHI2, Method.G])
    c.add_argument("--reps", type=_positive_int, default=1000)
    common(c, scenario_sizes=True)
    return parser


def _check_calibration(method: Method, calibration: str):
    if calibration == "asymptotic" and not method.classical:
        raise ConfigError(f"asymptotic calibration is only defined for chi2 and g, not {method.value}")


def _seed(args) -> int:
    seed = streams.fresh_seed() if args.seed is None else args.seed
    try:
        return streams.check_seed(seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _pmf(args, n):
    if args.scenario == WORST_CASE:
        return worst_case_pmf(n, args.d)
    try:
        sc = int(args.scenario)
    except ValueError:
        raise ConfigError(f"unknown scenario {args.scenario!r}") from None
    return scenario_pmf(sc, args.l1, args.l2, args.d)


def cmd_test(args) -> str:
    method = Method(args.method)
    _check_calibration(method, args.calibration)
    data = read_csv(args.input, l1=args.l1, l2=args.l2, d=args.d)
    if args.calibration == "asymptotic":
        result = asymptotic_test(data, method, args.alpha)
    else:
        plan = PermutationPlan(method, args.B, _seed(args), args.alpha)
        result = run_test(data, plan, workers=args.workers)
    if args.format == "json":
        return _json_text(result.to_dict())
    header = ["method", "calibration", "statistic", "p_value", "decision", "alpha", "B", "seed", "df", "skipped_bins"]
    row = [
        result.method.value,
        result.calibration,
        repr(result.observed),
        repr(result.p_value),
        result.decision,
        result.alpha,
        "" if result.B is None else result.B,
        "" if result.seed is None else result.seed,
        "" if result.df is None else result.df,
        " ".join(map(str, result.skipped_bins)),
    ]
    return _csv_text(header, [row])


def _estimate(args, method, n, seed):
    _check_calibration(method, args.calibration)
    plan = PermutationPlan(method, args.B, seed, args.alpha)
    return estimate_power(
        _pmf(args, n), n, plan, args.reps, seed, args.calibration, scenario=args.scenario, workers=args.workers
    )


def cmd_simulate(args) -> str:
    seed = _seed(args)
    start = time.perf_counter()
    est = _estimate(args, Method(args.method), args.n, seed)
    doc = est.to_dict()
    if args.timing:
        doc["wall_clock_s"] = round(time.perf_counter() - start, 3)
    if args.format == "json":
        return _json_text(doc)
    return _csv_text(list(doc), [list(doc.values())])


def cmd_power_curve(args) -> str:
    seed = _seed(args)
    rows = []
    for method in args.methods:
        for n in args.n:
            est = _estimate(args, method, n, seed)
            rows.append([est.scenario, est.method, est.n, "" if est.B is None else est.B, est.alpha,
                         est.reps, repr(est.power), repr(est.se), est.seed])
    return _csv_text(CURVE_COLUMNS, rows)


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "power-curve": cmd_power_curve}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"discreteci: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"discreteci: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
