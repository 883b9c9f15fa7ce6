"""Command-line interface: table caching, analysis, scanning, and simulation.

Commands
--------
table      build (or validate) the tabulated BHP density cache
analyze    full per-sign analysis of a price CSV at a fixed exponent
scan       locate the exponent maximizing the KS P value, then analyze there
simulate   generate a synthetic price CSV whose rescaled returns follow the
           truncated BHP law (ground truth for recovery tests)

Every command exits nonzero on failure and prints a machine-readable JSON
error description to stderr.  Reports and cache files are deterministic:
identical inputs, flags, and seeds reproduce identical bytes, independent of
the worker count.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alpha_scan import oriented_truncation, refine, scan
from .bhp import BhpParams, BhpTable, load_or_build, sample
from .collapse import (
    HistogramSpec,
    collapse_section,
    distance_section,
    histogram,
    overlay,
    report,
    return_collapse,
    scan_section,
    stats_section,
    transformed_pdf,
    transformed_section,
)
from .errors import BhpCollapseError, InsufficientDataError, InvalidParameterError
from .ks import distance_curve, ks_test
from .returns import NEGATIVE, POSITIVE, compute_returns, fluctuations, load_price_csv, partition

CACHE_DIR_ENV = "BHPCOLLAPSE_CACHE_DIR"

# The asymptotic P-value formula is untrustworthy for tiny samples.
MIN_KS_SAMPLE = 20

DEFAULT_ALPHA_MIN = 0.45
DEFAULT_ALPHA_MAX = 0.65
DEFAULT_ALPHA_STEP = 0.005
REFINE_TARGET_WIDTH = 0.001
DEFAULT_BINS = 30

_SIM_START_DATE = dt.date(1984, 4, 2)
_SIM_START_PRICE = 1000.0
_DENSE_CURVE_POINTS = 201


def _cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "bhpcollapse"


def _default_cache_path(params: BhpParams) -> Path:
    key = "|".join(
        format(v, ".17g")
        for v in (params.x_max, params.grid_min, params.grid_max,
                  params.grid_step, params.quadrature_abs_tol)
    )
    digest = hashlib.sha256(f"L={params.lattice_side}|{key}".encode()).hexdigest()[:12]
    return _cache_dir() / f"bhp_table_L{params.lattice_side}_{digest}.tsv"


def _resolve_table(args) -> tuple[BhpTable, Path, bool]:
    params = BhpParams.default(lattice_side=args.L, grid_step=args.grid_step)
    path = Path(args.table) if args.table else _default_cache_path(params)
    table, rebuilt = load_or_build(params, path)
    if rebuilt:
        print(f"built BHP table cache: {path}", file=sys.stderr)
    return table, path, rebuilt


def _file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(args, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _signs(choice: str) -> tuple[str, ...]:
    if choice == "both":
        return (POSITIVE, NEGATIVE)
    return (choice,)


def _counts_section(n_prices: int, n_returns: int, positives, negatives, zeros: int) -> dict:
    n_pos = int(positives.size)
    n_neg = int(negatives.size)
    return {
        "n_prices": n_prices,
        "n_returns": n_returns,
        "n_positive": n_pos,
        "n_negative": n_neg,
        "n_zero": zeros,
        "positive_fraction_of_prices": n_pos / n_prices,
        "negative_fraction_of_prices": n_neg / n_prices,
        "positive_fraction_of_returns": n_pos / n_returns,
        "negative_fraction_of_returns": n_neg / n_returns,
    }


def _require_ks_sample(sign: str, magnitudes) -> None:
    if magnitudes.size < MIN_KS_SAMPLE:
        raise InsufficientDataError(
            f"need at least {MIN_KS_SAMPLE} {sign} returns for the KS test, "
            f"got {magnitudes.size}"
        )


def _analyze_sign(sign: str, magnitudes: np.ndarray, alpha: float,
                  table: BhpTable, bins: int) -> dict:
    """Stats, transformed pdf, histogram overlays, and distance curve at one alpha."""
    _require_ks_sample(sign, magnitudes)
    fset = fluctuations(magnitudes, alpha, sign)
    trunc = oriented_truncation(table, fset.l_min, fset.r_max)
    ks_result = ks_test(fset.values, trunc.cdf)
    tp = transformed_pdf(fset, trunc)

    fluct_spec = HistogramSpec(bin_count=bins, lo=fset.l_min, hi=fset.r_max)
    fluct_record = overlay(histogram(fset.values, fluct_spec), trunc)
    mag_spec = HistogramSpec(
        bin_count=bins, lo=float(magnitudes.min()), hi=float(magnitudes.max())
    )
    returns_record = return_collapse(magnitudes, tp, mag_spec)

    grid = np.linspace(fset.l_min, fset.r_max, _DENSE_CURVE_POINTS)
    xs, dist = distance_curve(fset.values, trunc.cdf, grid)

    return {
        "stats": stats_section(fset),
        "transformed": transformed_section(tp),
        "histograms": {
            "fluctuations": collapse_section(fluct_record),
            "returns": collapse_section(returns_record),
        },
        "distance_curve": distance_section(xs, dist, ks_result),
    }


def _meta(command: str, args, config: dict, input_path=None) -> dict:
    meta: dict = {"tool": "bhpcollapse", "version": __version__, "command": command}
    if input_path is not None:
        meta["input"] = {"path": str(input_path), "sha256": _file_sha256(input_path)}
    # Worker count and output paths are execution details, not analysis
    # configuration; leaving them out keeps reports byte-identical across
    # worker counts.
    meta["config"] = dict(config)
    meta["config"]["lattice_side"] = args.L
    meta["config"]["grid_step"] = args.grid_step
    meta["config"]["min_ks_sample"] = MIN_KS_SAMPLE
    return meta


def cmd_table(args) -> int:
    table, path, rebuilt = _resolve_table(args)
    state = "rebuilt" if rebuilt else "cached"
    print(
        f"{path} [{state}] lattice_side={table.params.lattice_side} "
        f"n_sites={table.params.n_sites} grid=[{table.params.grid_min}, "
        f"{table.params.grid_max}] step={table.params.grid_step} "
        f"normalization_factor={table.normalization_factor:.12g}"
    )
    return 0


def cmd_analyze(args) -> int:
    table, _, _ = _resolve_table(args)
    prices = load_price_csv(args.input)
    returns = compute_returns(prices)
    positives, negatives, zeros = partition(returns)
    magnitudes = {POSITIVE: positives, NEGATIVE: negatives}

    stats: dict = {}
    transformed: dict = {}
    histograms: dict = {}
    curves: dict = {}
    for sign in _signs(args.sign):
        sections = _analyze_sign(sign, magnitudes[sign], args.alpha, table, args.bins)
        stats[sign] = sections["stats"]
        transformed[sign] = sections["transformed"]
        histograms[sign] = sections["histograms"]
        curves[sign] = sections["distance_curve"]

    config = {"mode": "analyze", "sign": args.sign, "alpha": args.alpha, "bins": args.bins}
    text = report(
        meta=_meta("analyze", args, config, args.input),
        counts=_counts_section(len(prices), len(returns), positives, negatives, zeros),
        stats=stats,
        transformed=transformed,
        histograms=histograms,
        distance_curves=curves,
    )
    _emit(args, text)
    return 0


def cmd_scan(args) -> int:
    if not args.alpha_min < args.alpha_max:
        raise InvalidParameterError(
            f"scan range is empty: [{args.alpha_min}, {args.alpha_max}]"
        )
    table, _, _ = _resolve_table(args)
    prices = load_price_csv(args.input)
    returns = compute_returns(prices)
    positives, negatives, zeros = partition(returns)
    magnitudes = {POSITIVE: positives, NEGATIVE: negatives}

    scans: dict = {}
    stats: dict = {}
    transformed: dict = {}
    histograms: dict = {}
    curves: dict = {}
    for sign in _signs(args.sign):
        _require_ks_sample(sign, magnitudes[sign])
        coarse = scan(
            magnitudes[sign], args.alpha_min, args.alpha_max, args.alpha_step,
            table, sign=sign, workers=args.workers,
        )
        result = refine(
            magnitudes[sign], coarse, table, REFINE_TARGET_WIDTH, workers=args.workers
        )
        scans[sign] = scan_section(result)
        sections = _analyze_sign(
            sign, magnitudes[sign], result.alpha_star, table, args.bins
        )
        stats[sign] = sections["stats"]
        transformed[sign] = sections["transformed"]
        histograms[sign] = sections["histograms"]
        curves[sign] = sections["distance_curve"]

    config = {
        "mode": "scan",
        "sign": args.sign,
        "alpha_min": args.alpha_min,
        "alpha_max": args.alpha_max,
        "alpha_step": args.alpha_step,
        "refine_width": REFINE_TARGET_WIDTH,
        "bins": args.bins,
    }
    text = report(
        meta=_meta("scan", args, config, args.input),
        counts=_counts_section(len(prices), len(returns), positives, negatives, zeros),
        scans=scans,
        stats=stats,
        transformed=transformed,
        histograms=histograms,
        distance_curves=curves,
    )
    _emit(args, text)
    return 0


def cmd_simulate(args) -> int:
    if args.count < 1:
        raise InvalidParameterError(f"--count must be >= 1, got {args.count}")
    if args.sigma0 <= 0 or args.mu0 <= 0:
        raise InvalidParameterError("--mu0 and --sigma0 must be positive")
    if not 0.0 < args.alpha0 <= 2.0:
        raise InvalidParameterError(f"--alpha0 must lie in (0, 2], got {args.alpha0}")
    if not args.output:
        raise InvalidParameterError("simulate requires --output")
    table, _, _ = _resolve_table(args)
    oriented = table.reflected()
    trunc = oriented_truncation(
        table, oriented.params.grid_min, oriented.params.grid_max
    )
    threshold = -args.mu0 / args.sigma0

    rng = np.random.default_rng(args.seed)
    pieces: list[np.ndarray] = []
    remaining = args.count
    stalls = 0
    while remaining > 0:
        draw = sample(trunc, remaining, rng)
        draw = draw[draw > threshold]
        if draw.size == 0:
            stalls += 1
            if stalls > 1000:
                raise InvalidParameterError(
                    "rejection sampling stalled; mu0/sigma0 leave no admissible mass"
                )
            continue
        pieces.append(draw)
        remaining -= draw.size
    fluct = np.concatenate(pieces)
    magnitudes = (args.sigma0 * fluct + args.mu0) ** (1.0 / args.alpha0)
    if (magnitudes >= 1.0).any():
        raise InvalidParameterError(
            "simulated magnitudes reach 1, which would produce non-positive prices; "
            "reduce --mu0/--sigma0"
        )
    negative_mask = rng.random(args.count) < 0.5
    daily = np.where(negative_mask, -magnitudes, magnitudes)
    prices = _SIM_START_PRICE * np.concatenate([[1.0], np.cumprod(1.0 + daily)])

    lines = ["date,close"]
    for offset, price in enumerate(prices):
        day = _SIM_START_DATE + dt.timedelta(days=offset)
        lines.append(f"{day.isoformat()},{price:.17g}")
    Path(args.output).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    print(
        f"wrote {args.output}: {prices.size} prices / {args.count} returns "
        f"(alpha0={args.alpha0}, mu0={args.mu0}, sigma0={args.sigma0}, seed={args.seed})"
    )
    return 0


def _add_table_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--table", metavar="PATH", default=None,
                        help="BHP table cache file (default: per-parameter file "
                             f"under ${CACHE_DIR_ENV} or ~/.cache/bhpcollapse)")
    parser.add_argument("--L", type=int, default=10, metavar="N",
                        help="lattice side for the BHP spectrum (default 10)")
    parser.add_argument("--grid-step", type=float, default=1e-3, metavar="X",
                        help="tabulation grid step (default 1e-3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhpcollapse",
        description="Data collapse of rescaled daily index returns onto the "
                    "universal BHP fluctuation density",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p_table = commands.add_parser("table", help="build or validate the BHP table cache")
    _add_table_options(p_table)
    p_table.set_defaults(func=cmd_table)

    p_analyze = commands.add_parser("analyze", help="analyze a price CSV at a fixed exponent")
    p_analyze.add_argument("--input", required=True, metavar="PATH", help="price CSV (date,close)")
    p_analyze.add_argument("--output", metavar="PATH", default=None,
                           help="report destination (default: stdout)")
    p_analyze.add_argument("--sign", choices=["positive", "negative", "both"], default="both")
    p_analyze.add_argument("--alpha", type=float, required=True, metavar="X",
                           help="fixed rescaling exponent in (0, 2]")
    p_analyze.add_argument("--bins", type=int, default=DEFAULT_BINS, metavar="N")
    p_analyze.add_argument("--workers", type=int, default=os.cpu_count() or 1, metavar="N",
                           help="worker threads (results are worker-count independent)")
    _add_table_options(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_scan = commands.add_parser("scan", help="find the exponent maximizing the KS P value")
    p_scan.add_argument("--input", required=True, metavar="PATH")
    p_scan.add_argument("--output", metavar="PATH", default=None)
    p_scan.add_argument("--sign", choices=["positive", "negative", "both"], default="both")
    p_scan.add_argument("--alpha-min", type=float, default=DEFAULT_ALPHA_MIN, metavar="X")
    p_scan.add_argument("--alpha-max", type=float, default=DEFAULT_ALPHA_MAX, metavar="X")
    p_scan.add_argument("--alpha-step", type=float, default=DEFAULT_ALPHA_STEP, metavar="X")
    p_scan.add_argument("--bins", type=int, default=DEFAULT_BINS, metavar="N")
    p_scan.add_argument("--workers", type=int, default=os.cpu_count() or 1, metavar="N",
                        help="worker threads (results are worker-count independent)")
    _add_table_options(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_sim = commands.add_parser("simulate", help="write a synthetic price CSV")
    p_sim.add_argument("--output", required=True, metavar="PATH")
    p_sim.add_argument("--count", type=int, required=True, metavar="N",
                       help="number of daily returns to generate")
    p_sim.add_argument("--seed", type=int, default=0, metavar="N")
    p_sim.add_argument("--alpha0", type=float, default=0.55, metavar="X")
    p_sim.add_argument("--mu0", type=float, default=0.063, metavar="X")
    p_sim.add_argument("--sigma0", type=float, default=0.032, metavar="X")
    _add_table_options(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BhpCollapseError as exc:
        sys.stderr.write(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}})
            + "\n"
        )
        return 1
    except OSError as exc:
        sys.stderr.write(
            json.dumps({"error": {"type": "OSError", "message": str(exc)}}) + "\n"
        )
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
