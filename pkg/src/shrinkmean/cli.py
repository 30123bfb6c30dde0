"""Command-line interface: one-shot estimation and the named benchmark experiments.

Exit codes: 0 success, 2 usage or input error, 3 degenerate result.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .estimators import DegenerateEstimateError, EtaRule, evaluate, parse_estimator, parse_eta
from .harness import experiments
from .harness.experiments import BenchOptions
from .simulate import parse_distribution

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3

DEFAULT_DISTS = "normal,skewnormal:a=5,t:nu=2.01,skewt:nu=2.01,a=5"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 too; keep its message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def read_column(path) -> np.ndarray:
    """One numeric value per line; a non-numeric first line is taken as a header."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    values = []
    for i, line in enumerate(lines):
        cell = line.split(",")[0].strip()
        if not cell:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            if i == 0:
                continue
            raise InputError(f"{path}:{i + 1}: not a number: {cell!r}") from None
    if not values:
        raise InputError(f"{path} contains no data")
    x = np.array(values)
    if not np.all(np.isfinite(x)):
        raise InputError(f"{path} contains non-finite values")
    return x


def split_dists(text: str) -> list[str]:
    """Split a comma list of distributions; ``skewt:nu=2.01,a=5`` keeps its parameters."""
    out: list[str] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" in item and ":" not in item and out:
            out[-1] += "," + item
        else:
            out.append(item)
    return out


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "nan")


# -- estimate ----------------------------------------------------------------

def cmd_estimate(args) -> int:
    try:
        spec = parse_estimator(args.estimator)
        if args.eta is not None:
            if not spec.is_shrinkage:
                raise InputError("--eta only applies to shrinkage estimators")
            from dataclasses import replace

            spec = replace(spec, eta_rule=parse_eta(args.eta, spec.eta_rule.xi))
        x = read_column(args.data)
        base = read_column(args.base) if args.base else None
        est = evaluate(spec, x, base, delta=args.delta, epsilon=args.eps)
    except (InputError, ValueError) as exc:
        if isinstance(exc, DegenerateEstimateError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DEGENERATE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not math.isfinite(est.value):
        print("error: the estimate is undefined for this input", file=sys.stderr)
        return EXIT_DEGENERATE
    print(f"estimate: {_fmt(est.value)}")
    if est.diagnostics is not None:
        print(f"alpha_hat: {_fmt(est.diagnostics.alpha_hat)}")
        print(f"weight_sum: {_fmt(est.diagnostics.weight_sum)}")
        print(f"eta: {_fmt(est.eta)}")
        print(f"kappa: {_fmt(est.kappa)}")
        if not est.independent_base:
            print("note: base estimate computed on the same sample")
    return EXIT_OK


# -- bench -------------------------------------------------------------------

# ExperimentConfig field names accepted in --config files
CONFIG_KEYS = {
    "distributions",
    "estimators",
    "N",
    "split",
    "m",
    "delta",
    "epsilon",
    "contamination_value",
    "trials",
    "seed_plan",
    "seed",
    "threads",
    "eta_rule",
    "p",
    "levels",
}


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise InputError(f"{path}: unknown keys {sorted(unknown)}")
    return data


def bench_options(args) -> BenchOptions:
    conf = load_config(args.config) if args.config else {}
    dists = conf.get("distributions", split_dists(args.dists))
    opts = BenchOptions(
        distributions=[parse_distribution(d) for d in dists],
        N=int(conf.get("N", args.N)),
        m=int(conf.get("m", args.m)),
        delta=float(conf.get("delta", args.delta)),
        contamination_value=float(conf.get("contamination_value", args.value)),
        trials=int(conf.get("trials", args.trials)),
        seed=int(conf.get("seed", args.seed)),
        threads=int(conf.get("threads", args.threads)),
        p=float(conf.get("p", args.p)),
    )
    if "split" in conf:
        split = str(conf["split"])
        if not split.startswith("m=") and not split.replace(".", "", 1).isdigit():
            raise InputError("config split must be m=<int> or a ratio")
        from .harness.core import Split

        opts.m = Split.parse(split).base_size(opts.N)
    if "seed_plan" in conf:
        opts.seed = int(conf["seed_plan"].get("master_seed", opts.seed))
    eta = conf.get("eta_rule", args.eta_rule)
    if eta is not None:
        opts.eta_rule = parse_eta(str(eta), args.xi)
    opts.levels = conf.get("levels", args.levels)
    if "estimators" in conf:
        opts.estimators = [parse_estimator(e) for e in conf["estimators"]]
    if args.experiment != "contamination":
        eps = conf.get("epsilon", args.eps)
        eps_list = _floats(str(eps)) if eps is not None else [0.0]
        if len(eps_list) != 1:
            raise InputError(f"{args.experiment} takes a single --eps value")
        opts.epsilon = eps_list[0]
    return opts


def cmd_bench(args) -> int:
    if args.experiment not in experiments.EXPERIMENTS:
        print(
            f"error: unknown experiment {args.experiment!r}; expected one of "
            + ", ".join(experiments.EXPERIMENTS),
            file=sys.stderr,
        )
        return EXIT_INPUT
    try:
        opts = bench_options(args)
        name = args.experiment
        if name == "table1":
            result = experiments.run_table1(opts, _ints(args.sizes) if args.sizes else None)
        elif name == "violations":
            result = experiments.run_violations(opts)
        elif name == "splits":
            result = experiments.run_splits(
                opts,
                [s.strip() for s in args.splits.split(",")] if args.splits else None,
                _floats(args.ratios) if args.ratios else None,
            )
        elif name == "contamination":
            eps = args.eps if args.eps is not None else ",".join(f"{e:g}" for e in experiments.DEFAULT_EPSILONS)
            result = experiments.run_contamination(opts, _floats(eps))
        else:
            result = experiments.run_best_split(
                opts,
                _ints(args.m_grid) if args.m_grid else None,
                _ints(args.N_grid) if args.N_grid else None,
                args.replications,
            )
        out = Path(args.out) / name
        result.save(out, raw=not args.no_raw, svg=not args.no_svg)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(result.summary_markdown(), end="")
    print(f"wrote {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

class _DefaultsFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Append ``(default: ...)`` unless the help text already states the default."""

    def _get_help_string(self, action):
        if "default" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shrinkmean",
        description="Shrinkage mean estimators and their Monte Carlo benchmarks.",
        formatter_class=_DefaultsFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the harness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser(
        "estimate",
        help="estimate the mean of a one-column CSV",
        formatter_class=_DefaultsFormatter,
    )
    est.add_argument("data", help="one-column CSV of observations")
    est.add_argument("estimator", help="estimator string, e.g. mean, tm:k=3 or shrink:base=median,w=rational")
    est.add_argument("--base", default=None, help="separate sample for the base estimate (default: reuse data)")
    est.add_argument("--delta", type=float, default=0.05, help="confidence parameter")
    est.add_argument("--eps", type=float, default=0.0, help="contamination level used by the theory eta rule")
    est.add_argument("--eta", default=None, help="override the eta rule: a number, log or theory")
    est.set_defaults(func=cmd_estimate)

    b = sub.add_parser(
        "bench",
        help="run a named benchmark experiment",
        formatter_class=_DefaultsFormatter,
    )
    b.add_argument("experiment", help="one of " + ", ".join(experiments.EXPERIMENTS))
    b.add_argument("--trials", type=int, default=10_000, help="Monte Carlo trials per cell")
    b.add_argument("--seed", type=int, default=0, help="master seed")
    b.add_argument("--delta", type=float, default=0.05, help="confidence parameter; errors use the 1-delta quantile")
    b.add_argument("--N", type=int, default=500, help="total sample size")
    b.add_argument("--m", type=int, default=25, help="base sample size")
    b.add_argument(
        "--eps",
        default=None,
        help="contamination level (contamination sweep: comma list, default 0,0.05,0.1,0.2; others: 0)",
    )
    b.add_argument("--value", type=float, default=1e6, help="contamination value")
    b.add_argument("--dists", default=DEFAULT_DISTS, help="comma list of distributions")
    b.add_argument("--out", default="out", help="output root; files go to <out>/<experiment>/")
    b.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    b.add_argument(
        "--eta-rule",
        default=None,
        help="log, theory or a number (default: log; theory for the contamination sweep)",
    )
    b.add_argument(
        "--levels",
        choices=("log", "eps"),
        default=None,
        help="TM trimming / MoM bucket rule: log uses ceil(ln(1/delta)), eps adds the contaminated count"
        " (default: log; eps for the contamination sweep)",
    )
    b.add_argument("--xi", type=float, default=0.5, help="xi of the theory eta rule")
    b.add_argument("--p", type=float, default=2.0, help="exponent of the parameterized weights")
    b.add_argument("--config", default=None, help="JSON file with ExperimentConfig keys, overriding flags")
    b.add_argument("--sizes", default=None, help="table1: comma list of N for the error-vs-size figure")
    b.add_argument("--splits", default=None, help="splits: comma list (NA, ratios or m=<int>); default NA,0.05,0.5,0.95")
    b.add_argument("--ratios", default=None, help="splits: extra split ratios for the figure")
    b.add_argument("--m-grid", dest="m_grid", default=None, help="best-split: comma list of base sizes")
    b.add_argument("--N-grid", dest="N_grid", default=None, help="best-split: comma list of total sizes")
    b.add_argument("--replications", type=int, default=50, help="best-split: independent replications")
    b.add_argument("--no-raw", action="store_true", help="skip raw.csv")
    b.add_argument("--no-svg", action="store_true", help="skip SVG charts")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
