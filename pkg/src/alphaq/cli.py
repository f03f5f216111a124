"""Command-line entry point: ``alphaq <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant failure.
Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from alphaq.config import read_kv
from alphaq.exceptions import AlphaQError
from alphaq.experiments import ExperimentSpec, run_power_curve, run_size_table
from alphaq.regression import FactorPanel, ReturnPanel
from alphaq.rolling import (
    PAPER_WINDOWS,
    convert_prices_csv,
    excess_returns,
    load_factors_csv,
    load_returns_csv,
    rolling_run,
)
from alphaq.statistics import DEFAULT_VARRHO, DEFAULT_ZETA, run_alpha_tests
from alphaq.validation import run_all

log = logging.getLogger("alphaq")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DEFAULT_POWER_SWEEP = (1, 2, 3, 5, 8, 12, 20, 30, 50, 80, 120, 150)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _list_of(kind):
    def parse(text):
        try:
            return tuple(kind(x) for x in str(text).split(",") if x.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated values, got {text!r}")
    parse.__name__ = f"{kind.__name__} list"
    return parse


def _add_test_constants(p):
    p.add_argument("--zeta", type=float, default=DEFAULT_ZETA, help="threshold level constant")
    p.add_argument("--varrho", type=float, default=DEFAULT_VARRHO, help="threshold exponent on N")


def _add_sim_grid(p, T, N, reps):
    p.add_argument("--T", type=_list_of(int), default=T, help="time-series lengths (comma separated)")
    p.add_argument("--N", type=_list_of(int), default=N, help="numbers of assets (comma separated)")
    p.add_argument("--delta-gamma", type=_list_of(float), default=(0.0,),
                   help="latent factor strength exponents")
    p.add_argument("--psi", type=_list_of(float), default=(0.0,), help="spatial dependence coefficients")
    p.add_argument("--innovation", type=_list_of(str), default=("gaussian",),
                   help="innovation laws: gaussian, student_t8")
    p.add_argument("--reps", type=int, default=reps, help="replications per cell")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--level", type=float, default=0.05, help="nominal significance level")
    p.add_argument("--kappa", type=float, default=6.5, help="error scale")
    p.add_argument("--burn-in", type=int, default=50, help="discarded factor burn-in periods")
    p.add_argument("--threads", type=int, default=1, help="worker processes (output does not depend on it)")
    p.add_argument("--out", default="-", help="CSV output path, '-' for stdout")
    p.add_argument("--pretty", action="store_true", help="also print a percent table to stderr")
    _add_test_constants(p)


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="alphaq", description="L_q-norm tests for zero alphas in factor pricing models",
                     formatter_class=fmt)
    parser.add_argument("--config", help="key = value file supplying defaults for any flag")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("test", help="run the six tests on a returns/factors CSV pair", formatter_class=fmt)
    p.add_argument("--returns", required=True, help="CSV with month,asset,ret")
    p.add_argument("--factors", required=True, help="CSV with month,MktRF,RF")
    p.add_argument("--allow-extra", type=_list_of(str), default=(),
                   help="extra factor-file columns to tolerate (ignored)")
    _add_test_constants(p)

    p = sub.add_parser("simulate-size", help="empirical sizes over a simulation grid", formatter_class=fmt)
    _add_sim_grid(p, T=(240,), N=(100,), reps=1000)

    p = sub.add_parser("simulate-power", help="power against sparse alternatives", formatter_class=fmt)
    _add_sim_grid(p, T=(120,), N=(200,), reps=500)
    p.add_argument("--n-active", type=_list_of(int), default=DEFAULT_POWER_SWEEP,
                   help="numbers of nonzero alphas to sweep")

    p = sub.add_parser("rolling", help="rolling-window CAPM tests", formatter_class=fmt)
    p.add_argument("--returns", required=True, help="CSV with month,asset,ret")
    p.add_argument("--factors", required=True, help="CSV with month,MktRF,RF")
    p.add_argument("--windows", type=_list_of(int), default=PAPER_WINDOWS, help="window lengths in months")
    p.add_argument("--min-assets", type=int, default=100, help="minimum complete assets per window")
    p.add_argument("--step", type=int, default=1, help="months between window ends")
    p.add_argument("--level", type=float, default=0.05, help="nominal significance level")
    p.add_argument("--allow-extra", type=_list_of(str), default=(),
                   help="extra factor-file columns to tolerate (ignored)")
    p.add_argument("--out-dir", default=None,
                   help="write paths_T<w>.csv and summary_T<w>.csv here instead of stdout")
    _add_test_constants(p)

    p = sub.add_parser("validate", help="check the analytic formulas against independent oracles",
                       formatter_class=fmt)
    p.add_argument("--mc-draws", type=int, default=1_000_000,
                   help="Monte Carlo draws per variance check (0 skips them)")
    p.add_argument("--seed", type=int, default=12345, help="Monte Carlo seed")

    p = sub.add_parser("convert-prices", help="month-end prices to monthly returns", formatter_class=fmt)
    p.add_argument("--prices", required=True, help="CSV with month,asset,price")
    p.add_argument("--out", required=True, help="returns CSV to write")
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = read_kv(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}")
        sub = parser._subparsers._group_actions[0].choices.get(args.command)
        targets = [parser] + ([sub] if sub is not None else [])
        dests = {a.dest for t in targets for a in t._actions}
        unknown = set(k.replace("-", "_") for k in overrides) - dests
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        flags = {a.dest for t in targets for a in t._actions if isinstance(a, argparse._StoreTrueAction)}
        values = {}
        for key, text in overrides.items():
            dest = key.replace("-", "_")
            if dest in flags:
                if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise UsageError(f"config key {key} expects true/false, got {text!r}")
                values[dest] = text.lower() in ("true", "1", "yes")
            else:
                values[dest] = text
        # file values become defaults, so explicit flags still win
        for t in targets:
            owned = {a.dest for a in t._actions}
            t.set_defaults(**{k: v for k, v in values.items() if k in owned})
        args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required")
    return args


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_test(args):
    history = load_returns_csv(args.returns)
    factors = load_factors_csv(args.factors, allow_extra=args.allow_extra)
    excess, mkt = excess_returns(history, factors)
    complete = ~np.any(np.isnan(excess), axis=1)
    if not np.any(complete):
        raise AlphaQError("no asset is observed in every month")
    dropped = int(np.count_nonzero(~complete))
    if dropped:
        log.warning("dropping %d asset(s) with missing months", dropped)
    panel = ReturnPanel(excess[complete], asset_ids=[a for a, c in zip(history.assets, complete) if c],
                        time_ids=history.months)
    report = run_alpha_tests(panel, FactorPanel(mkt[:, None], factor_names=("MktRF",)),
                             zeta=args.zeta, varrho=args.varrho)
    _write(report.to_json(indent=2) + "\n", "-")
    return EXIT_OK


def _spec_from(args, n_active):
    return ExperimentSpec(
        T=args.T, N=args.N, delta_gamma=args.delta_gamma, psi=args.psi,
        innovation=args.innovation, n_active=n_active, replications=args.reps,
        nominal_level=args.level, master_seed=args.seed, kappa=args.kappa,
        burn_in=args.burn_in, zeta=args.zeta, varrho=args.varrho,
    )


def cmd_simulate(args, power):
    spec = _spec_from(args, args.n_active if power else (0,))
    table = run_power_curve(spec, threads=args.threads) if power else run_size_table(spec, threads=args.threads)
    _write(table.to_csv(), args.out)
    if args.pretty:
        print(table.pretty(), file=sys.stderr)
    return EXIT_OK


def cmd_rolling(args):
    history = load_returns_csv(args.returns)
    factors = load_factors_csv(args.factors, allow_extra=args.allow_extra)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
    for window in args.windows:
        result = rolling_run(history, factors, window, min_assets=args.min_assets, step=args.step,
                             zeta=args.zeta, varrho=args.varrho, nominal_level=args.level)
        log.info("T=%d: %d windows evaluated, %d skipped", window, result.n_evaluated, len(result.skipped))
        if args.out_dir:
            _write(result.paths_csv(), os.path.join(args.out_dir, f"paths_T{window}.csv"))
            _write(result.summary_csv(), os.path.join(args.out_dir, f"summary_T{window}.csv"))
        else:
            _write(f"# window_T={window}\n" + result.paths_csv() + result.summary_csv(), "-")
    return EXIT_OK


def cmd_validate(args):
    checks = run_all(mc_draws=args.mc_draws, seed=args.seed)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_INTERNAL


def cmd_convert(args):
    convert_prices_csv(args.prices, args.out)
    return EXIT_OK


def main(argv=None):
    try:
        args = _parse(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"alphaq: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    handlers = {
        "test": cmd_test,
        "simulate-size": lambda a: cmd_simulate(a, power=False),
        "simulate-power": lambda a: cmd_simulate(a, power=True),
        "rolling": cmd_rolling,
        "validate": cmd_validate,
        "convert-prices": cmd_convert,
    }
    try:
        return handlers[args.command](args)
    except AlphaQError as exc:
        print(f"alphaq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"alphaq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort invariant failure
        print(f"alphaq: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
