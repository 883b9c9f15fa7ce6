"""Data-collapse artifacts: histograms, model overlays, and the transformed pdf.

The analysis produces three plot-ready artifacts per sign:

* density-normalized histograms of the standardized fluctuations with the
  truncated BHP pdf evaluated at the bin centers (linear and semi-log
  columns),
* the same for the raw return magnitudes against the analytic transformed
  density, and
* the KS distance curve |F_empirical - F_model|.

The transformed density of a raw magnitude x follows from the change of
variable u = (x^alpha - mu)/sigma applied to the truncated BHP density:

    g(x) = alpha * x^(alpha-1) * f(coef_b * x^alpha - coef_c)
           / (sigma * mass)                                with
    coef_b = 1/sigma,  coef_c = mu/sigma,  mass = F(upper) - F(lower),

supported on the image of the truncation interval.  Its prefactor is
coef_a = alpha / (sigma * mass); the ratio alpha/mu is reported alongside for
comparison because published write-ups of this analysis print that value as
the prefactor even though only coef_a normalizes the density.

Reports are rendered as deterministic JSON: same inputs and configuration
give byte-identical documents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alpha_scan import ScanResult
from .bhp import TruncatedBhp
from .errors import InsufficientDataError, InvalidParameterError
from .returns import FluctuationSet

_REPORT_SIGN_ORDER = ("positive", "negative")


@dataclass(frozen=True)
class HistogramSpec:
    """Bin count and range of a density-normalized histogram."""

    bin_count: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.bin_count < 5:
            raise InvalidParameterError(f"bin_count must be >= 5, got {self.bin_count}")
        if not self.lo < self.hi:
            raise InvalidParameterError(
                f"histogram range is degenerate: [{self.lo}, {self.hi}]"
            )


@dataclass(frozen=True)
class Histogram:
    """Density-normalized bin heights; out-of-range values counted separately."""

    spec: HistogramSpec
    edges: np.ndarray
    centers: np.ndarray
    densities: np.ndarray
    out_of_range: int
    n_total: int

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])


@dataclass(frozen=True)
class CollapseRecord:
    """Histogram heights paired with model density values at the bin centers."""

    centers: np.ndarray
    hist_density: np.ndarray
    model_density: np.ndarray
    log10_hist: tuple
    log10_model: tuple
    bin_width: float
    out_of_range: int


def histogram(values, spec: HistogramSpec) -> Histogram:
    """Density-normalized histogram; the heights integrate to one over the range."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InsufficientDataError("histogram needs a nonempty value list")
    counts, edges = np.histogram(values, bins=spec.bin_count, range=(spec.lo, spec.hi))
    in_range = int(counts.sum())
    if in_range == 0:
        raise InsufficientDataError("no values fall inside the histogram range")
    widths = np.diff(edges)
    densities = counts / (in_range * widths)
    return Histogram(
        spec=spec,
        edges=edges,
        centers=0.5 * (edges[:-1] + edges[1:]),
        densities=densities,
        out_of_range=int(values.size - in_range),
        n_total=int(values.size),
    )


def _log10_or_none(values: np.ndarray) -> tuple:
    """Base-10 logs with a None sentinel wherever the value is not positive."""
    return tuple(
        float(np.log10(v)) if v > 0.0 else None for v in np.asarray(values, dtype=float)
    )


def _collapse_record(hist: Histogram, model_density: np.ndarray) -> CollapseRecord:
    return CollapseRecord(
        centers=hist.centers,
        hist_density=hist.densities,
        model_density=np.asarray(model_density, dtype=float),
        log10_hist=_log10_or_none(hist.densities),
        log10_model=_log10_or_none(model_density),
        bin_width=hist.bin_width,
        out_of_range=hist.out_of_range,
    )


def overlay(hist: Histogram, trunc: TruncatedBhp) -> CollapseRecord:
    """Pair fluctuation-histogram heights with the truncated BHP pdf at bin centers."""
    return _collapse_record(hist, trunc.pdf(hist.centers))


@dataclass(frozen=True, eq=False)
class TransformedPdf:
    """Analytic density of raw magnitudes induced by the truncated-BHP collapse."""

    sign: str
    alpha_star: float
    mu: float
    sigma: float
    mass: float
    coef_a: float
    coef_b: float
    coef_c: float
    paper_coef_a: float
    trunc: TruncatedBhp

    @property
    def support(self) -> tuple[float, float]:
        """Image of the truncation interval under the inverse rescaling."""
        lo = (self.sigma * self.trunc.lower + self.mu) ** (1.0 / self.alpha_star)
        hi = (self.sigma * self.trunc.upper + self.mu) ** (1.0 / self.alpha_star)
        return float(lo), float(hi)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros(x.shape)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        if inside.any():
            xi = x[inside]
            out[inside] = (
                self.coef_a
                * xi ** (self.alpha_star - 1.0)
                * self.trunc.table.pdf_at(self.coef_b * xi**self.alpha_star - self.coef_c)
            )
        return float(out[0]) if scalar else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros(x.shape)
        positive = x > 0.0
        if positive.any():
            xp = x[positive]
            out[positive] = self.trunc.cdf(self.coef_b * xp**self.alpha_star - self.coef_c)
        return float(out[0]) if scalar else out


def transformed_pdf(fset: FluctuationSet, trunc: TruncatedBhp) -> TransformedPdf:
    """Change-of-variable density of the raw magnitudes behind ``fset``.

    ``trunc`` must be the truncation to the fluctuation range of the same
    analysis, so that the density is supported on the observed magnitudes.
    """
    if (
        abs(trunc.lower - fset.l_min) > 1e-9
        or abs(trunc.upper - fset.r_max) > 1e-9
    ):
        raise InvalidParameterError(
            "truncation window does not match the fluctuation range of the set"
        )
    if trunc.mass <= 0.0:
        raise InvalidParameterError("truncation mass must be positive")
    return TransformedPdf(
        sign=fset.sign,
        alpha_star=fset.alpha,
        mu=fset.mu_alpha,
        sigma=fset.sigma_alpha,
        mass=trunc.mass,
        coef_a=fset.alpha / (fset.sigma_alpha * trunc.mass),
        coef_b=1.0 / fset.sigma_alpha,
        coef_c=fset.mu_alpha / fset.sigma_alpha,
        paper_coef_a=fset.alpha / fset.mu_alpha,
        trunc=trunc,
    )


def return_collapse(magnitudes, tp: TransformedPdf, spec: HistogramSpec) -> CollapseRecord:
    """Histogram of raw magnitudes paired with the transformed density."""
    hist = histogram(magnitudes, spec)
    return _collapse_record(hist, tp.pdf(hist.centers))


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _jsonify(value):
    """Recursively convert numpy containers/scalars to JSON-safe structures."""
    if isinstance(value, dict):
        return {key: _jsonify(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(item) for item in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def scan_section(result: ScanResult) -> dict:
    return {
        "alphas": result.alphas,
        "p_values": result.p_values,
        "d_stats": result.d_stats,
        "alpha_star": result.alpha_star,
        "p_star": result.p_star,
        "failures": [{"alpha": a, "error": msg} for a, msg in result.failures],
    }


def stats_section(fset: FluctuationSet) -> dict:
    return {
        "alpha": fset.alpha,
        "count": fset.count,
        "mu": fset.mu_alpha,
        "sigma": fset.sigma_alpha,
        "l_min": fset.l_min,
        "r_max": fset.r_max,
    }


def transformed_section(tp: TransformedPdf) -> dict:
    gap = abs(tp.coef_a - tp.paper_coef_a) / tp.coef_a
    return {
        "alpha": tp.alpha_star,
        "coef_a": tp.coef_a,
        "coef_b": tp.coef_b,
        "coef_c": tp.coef_c,
        "paper_coef_a": tp.paper_coef_a,
        "mass": tp.mass,
        "support": list(tp.support),
        "prefactor_discrepancy": {
            "normalizing_value": tp.coef_a,
            "alpha_over_mu": tp.paper_coef_a,
            "relative_gap": gap,
            "published_prefactor_matches_alpha_over_mu": bool(gap > 0.01),
        },
    }


def collapse_section(record: CollapseRecord) -> dict:
    return {
        "centers": record.centers,
        "hist_density": record.hist_density,
        "model_density": record.model_density,
        "log10_hist": list(record.log10_hist),
        "log10_model": list(record.log10_model),
        "bin_width": record.bin_width,
        "out_of_range": record.out_of_range,
    }


def distance_section(x, distance, ks_result) -> dict:
    return {
        "x": np.asarray(x, dtype=float),
        "distance": np.asarray(distance, dtype=float),
        "d_stat": ks_result.d_stat,
        "d_location": ks_result.d_location,
        "p_value": ks_result.p_value,
        "n": ks_result.n,
    }


def report(*, meta: dict, counts: dict, scans: dict | None = None,
           stats: dict | None = None, transformed: dict | None = None,
           histograms: dict | None = None, distance_curves: dict | None = None) -> str:
    """Render the full analysis document as deterministic JSON text.

    Per-sign inputs are dicts keyed "positive"/"negative"; sections appear in
    a fixed order so identical inputs give byte-identical documents.
    """
    document: dict = {"meta": meta, "counts": counts}
    for label, sections in (
        ("scan", scans),
        ("stats", stats),
        ("transformed", transformed),
        ("histograms", histograms),
        ("distance_curves", distance_curves),
    ):
        if not sections:
            continue
        for sign in _REPORT_SIGN_ORDER:
            if sign in sections:
                document[f"{label}_{sign}"] = sections[sign]
    return json.dumps(_jsonify(document), indent=2, allow_nan=False) + "\n"


def write_collapse_tsv(record: CollapseRecord, path) -> None:
    """Export a collapse record as ``center<TAB>hist_density<TAB>model_density``."""
    lines = ["# center\thist_density\tmodel_density"]
    for center, hist_d, model_d in zip(
        record.centers, record.hist_density, record.model_density
    ):
        lines.append(
            f"{float(center):.17g}\t{float(hist_d):.17g}\t{float(model_d):.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
