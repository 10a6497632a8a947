"""Command-line front end.

Exit status is 0 on success, 1 on invalid arguments or data and 2 on I/O
failure. Tables go to stdout unless ``--out`` is given; diagnostics, including
any generated seed, go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap_eval import compare_batch, difference_histogram, verdict_totals
from .dataio import (
    DEFAULT_MC,
    DataError,
    load_responses,
    render_results,
    fresh_seed,
    write_counts,
)
from .distributions import default_map_grid, parameter_space_map
from .estimation import MODELS, fit
from .gof import DEFAULT_BIN_WIDTH, gof_batch, pp_plot, pvalue_histogram
from .plotting import render_svg
from .simulation import simulate_study


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _detect_format(path) -> str:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    cols = {h.strip() for h in header}
    return "counts" if {"n1", "n2", "n3", "n4", "n5"} <= cols else "tidy"


def _load(args):
    fmt = args.format
    if fmt == "auto":
        fmt = _detect_format(args.input)
    return load_responses(args.input, fmt)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_svg(args, data, kind):
    if getattr(args, "svg", None):
        Path(args.svg).write_text(render_svg(data, kind), encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_fit(args):
    ds = _load(args)
    rows = []
    for sid, counts in ds:
        r = fit(counts, args.model)
        rows.append({"stimulus_id": sid, "n": int(counts.sum()), **r.as_row()})
    _emit(render_results(rows, args.out_format, {"model": args.model}, kind="fit"), args.out)


def cmd_gof(args):
    ds = _load(args)
    seed = _seed(args)
    results = gof_batch(ds, args.model, args.mc, seed, threads=args.threads)
    config = {"model": args.model, "mc": args.mc, "seed": seed}
    _emit(render_results(results, args.out_format, config, kind="gof"), args.out)
    if args.svg:
        _write_svg(args, pvalue_histogram([r.p_value for r in results], args.bin_width), "histogram")


def _read_pvalues(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return np.array([float(r["p_value"]) for r in doc["results"]])
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "p_value" not in reader.fieldnames:
        raise DataError(f"{path}: no p_value column")
    return np.array([float(r["p_value"]) for r in reader])


def cmd_hist(args):
    p = _read_pvalues(args.input)
    h = pvalue_histogram(p, args.bin_width)
    config = {"bin_width": h.bin_width, "significance": h.significance,
              "reference_count": h.reference_count, "n_stimuli": len(p)}
    _emit(render_results(h.rows(), args.out_format, config, kind="histogram"), args.out)
    _write_svg(args, h, "histogram")


def cmd_pp_plot(args):
    p = _read_pvalues(args.input)
    pp = pp_plot(p, confidence=args.confidence, inspection_range=(0.0, args.alpha_max))
    config = {"confidence": pp.confidence, "inspection_range": list(pp.inspection_range),
              "n_stimuli": pp.n_stimuli, "verdict": pp.verdict}
    _emit(render_results(pp.rows(), args.out_format, config, kind="ppplot"), args.out)
    print(f"verdict: {'not contradicted' if pp.verdict else 'contradicted'}", file=sys.stderr)
    _write_svg(args, pp, "ppplot")


def cmd_compare(args):
    if args.model not in ("gsd", "sli"):
        raise DataError("compare supports --model gsd or sli")
    ds = _load(args)
    seed = _seed(args)
    results = compare_batch(ds, args.n_small, args.model, args.mc, seed, threads=args.threads)
    hist = difference_histogram(results, args.diff_bin_width)
    config = {"model": args.model, "n_small": args.n_small, "mc": args.mc, "seed": seed,
              "verdicts": verdict_totals(results)}
    text = render_results(results, args.out_format, config, kind="compare")
    hist_text = render_results(hist, args.out_format, config, kind="difference_histogram")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        hist_path = args.hist_out or str(Path(args.out).with_suffix("")) + "_hist." + args.out_format
        Path(hist_path).write_text(hist_text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.write("\n")
        sys.stdout.write(hist_text)
    _write_svg(args, hist, "difference")


def cmd_simulate(args):
    seed = _seed(args)
    ds, params = simulate_study(args.n_stimuli, args.n_responses, seed, prefix=args.prefix)
    if args.out:
        write_counts(ds, args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["stimulus_id", "n1", "n2", "n3", "n4", "n5"])
        for sid, c in ds:
            w.writerow([sid, *(int(x) for x in c)])
    if args.params_out:
        rows = [{"stimulus_id": sid, "psi": psi, "rho": rho} for (sid, _), (psi, rho) in zip(ds, params)]
        Path(args.params_out).write_text(render_results(rows, "csv", kind="params"), encoding="utf-8")


def cmd_param_map(args):
    p1, p2 = default_map_grid(args.model, args.sweep)
    rows = parameter_space_map(args.model, p1, p2)
    names = ("psi", "rho") if args.model == "gsd" else ("mu", "sigma")
    table = [{names[0]: a, names[1]: b, "mean": m, "variance": v} for a, b, m, v in rows]
    _emit(render_results(table, args.out_format, {"model": args.model, "sweep": args.sweep},
                         kind="param_map"), args.out)
    if args.svg:
        if args.sweep == "param1":
            rows = [(b, a, m, v) for a, b, m, v in rows]
        _write_svg(args, rows, "parammap")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsdkit", description="GSD modelling of 5-level subjective responses.")
    parser.add_argument("--version", action="version", version=f"gsdkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model=True, models=MODELS, randomized=False, inp=True):
        if inp:
            p.add_argument("--input", required=True, help="input CSV file")
            p.add_argument("--format", choices=("auto", "tidy", "counts"), default="auto",
                           help="input layout (default: detect from header)")
        if model:
            p.add_argument("--model", choices=models, default="gsd", help="model (default: gsd)")
        if randomized:
            p.add_argument("--mc", type=int, default=DEFAULT_MC,
                           help=f"bootstrap replicates (default: {DEFAULT_MC})")
            p.add_argument("--seed", type=int, default=None,
                           help="64-bit seed (default: generated and printed to stderr)")
            p.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--out-format", choices=("csv", "json"), default="csv",
                       help="output format (default: csv)")

    p = sub.add_parser("fit", help="fit a model to every stimulus")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gof", help="bootstrapped G-test per stimulus")
    common(p, randomized=True)
    p.add_argument("--svg", default=None, help="write the p-value histogram as SVG")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("hist", help="p-value histogram from gof output")
    common(p, model=False)
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH,
                   help=f"bin width (default: {DEFAULT_BIN_WIDTH})")
    p.add_argument("--svg", default=None, help="write the histogram as SVG")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("pp-plot", help="p-value P-P plot from gof output")
    common(p, model=False)
    p.add_argument("--confidence", type=float, default=0.95, help="band confidence (default: 0.95)")
    p.add_argument("--alpha-max", type=float, default=0.2,
                   help="upper end of the inspected alpha range (default: 0.2)")
    p.add_argument("--svg", default=None, help="write the P-P plot as SVG")
    p.set_defaults(func=cmd_pp_plot)

    p = sub.add_parser("compare", help="model vs empirical bootstrapping effectiveness test")
    common(p, models=("gsd", "sli"), randomized=True)
    p.add_argument("--n-small", type=int, default=24, help="subsample size (default: 24)")
    p.add_argument("--hist-out", default=None, help="difference histogram file")
    p.add_argument("--diff-bin-width", type=float, default=0.1,
                   help="bin width of the p_m - p_e histogram (default: 0.1)")
    p.add_argument("--svg", default=None, help="write the difference histogram as SVG")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="synthetic GSD study as a counts CSV")
    p.add_argument("--n-stimuli", type=int, default=100, help="number of stimuli (default: 100)")
    p.add_argument("--n-responses", type=int, default=24, help="responses per stimulus (default: 24)")
    p.add_argument("--seed", type=int, default=None,
                   help="64-bit seed (default: generated and printed to stderr)")
    p.add_argument("--prefix", default="sim", help="stimulus id prefix (default: sim)")
    p.add_argument("--out", default=None, help="output counts CSV (default: stdout)")
    p.add_argument("--params-out", default=None, help="write the true (psi, rho) per stimulus")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("param-map", help="(E(U), V(U)) induced by a parameter grid")
    common(p, models=("gsd", "probit"), inp=False)
    p.add_argument("--sweep", choices=("param1", "param2"), default="param2",
                   help="which parameter varies along each curve (default: param2)")
    p.add_argument("--svg", default=None, help="write the map as SVG")
    p.set_defaults(func=cmd_param_map)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("mc", "threads", "n_small", "n_stimuli", "n_responses"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise DataError(f"--{name.replace('_', '-')} must be >= 1")
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"gsdkit: I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"gsdkit: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
