"""Tests of histograms, model overlays, the transformed pdf, and reports."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhpcollapse.alpha_scan import oriented_truncation
from bhpcollapse.bhp import sample, truncate
from bhpcollapse.collapse import (
    HistogramSpec,
    collapse_section,
    distance_section,
    histogram,
    overlay,
    report,
    return_collapse,
    stats_section,
    transformed_pdf,
    transformed_section,
    write_collapse_tsv,
)
from bhpcollapse.errors import InsufficientDataError, InvalidParameterError
from bhpcollapse.ks import ks_test
from bhpcollapse.returns import fluctuations

MU0 = 0.063
SIGMA0 = 0.032
ALPHA0 = 0.55


def synthetic_magnitudes(table, seed, count):
    oriented = table.reflected()
    full = truncate(oriented, oriented.params.grid_min, oriented.params.grid_max)
    rng = np.random.default_rng(seed)
    pieces = []
    remaining = count
    while remaining > 0:
        draws = sample(full, remaining, rng)
        draws = draws[draws > -MU0 / SIGMA0]
        pieces.append(draws)
        remaining -= draws.size
    return (SIGMA0 * np.concatenate(pieces) + MU0) ** (1.0 / ALPHA0)


def analysis_pair(table, seed=5, count=100000):
    magnitudes = synthetic_magnitudes(table, seed, count)
    fset = fluctuations(magnitudes, ALPHA0)
    trunc = oriented_truncation(table, fset.l_min, fset.r_max)
    return magnitudes, fset, trunc


def graded_integral(tp, points=400001):
    """Trapezoid integral on a cubically graded grid resolving the left edge."""
    lo, hi = tp.support
    t = np.linspace(0.0, 1.0, points)
    xs = lo + (hi - lo) * t**3
    return float(np.trapezoid(tp.pdf(xs), xs))


class TestHistogram:
    def test_uniform_heights(self):
        values = np.random.default_rng(7).random(1000)
        hist = histogram(values, HistogramSpec(bin_count=10, lo=0.0, hi=1.0))
        assert np.abs(hist.densities - 1.0).max() < 0.15

    def test_point_mass(self):
        hist = histogram(np.full(50, 0.31), HistogramSpec(bin_count=10, lo=0.0, hi=1.0))
        assert hist.densities[3] == pytest.approx(10.0)
        assert np.count_nonzero(hist.densities) == 1

    def test_out_of_range_counted(self):
        values = np.array([0.5, 0.6, 5.0, -3.0])
        hist = histogram(values, HistogramSpec(bin_count=5, lo=0.0, hi=1.0))
        assert hist.out_of_range == 2
        assert float(np.sum(hist.densities * np.diff(hist.edges))) == pytest.approx(1.0, abs=1e-9)

    @given(
        st.lists(
            st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
            min_size=1,
            max_size=300,
        ).filter(lambda vs: any(0.0 <= v <= 1.0 for v in vs))
    )
    @settings(max_examples=100, deadline=None)
    def test_density_mass_is_one(self, values):
        hist = histogram(values, HistogramSpec(bin_count=7, lo=0.0, hi=1.0))
        assert float(np.sum(hist.densities) * hist.bin_width) == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_range_rejected(self):
        with pytest.raises(InvalidParameterError):
            HistogramSpec(bin_count=10, lo=1.0, hi=1.0)

    def test_too_few_bins_rejected(self):
        with pytest.raises(InvalidParameterError):
            HistogramSpec(bin_count=4, lo=0.0, hi=1.0)

    def test_no_values_in_range_rejected(self):
        with pytest.raises(InsufficientDataError):
            histogram([5.0, 6.0], HistogramSpec(bin_count=5, lo=0.0, hi=1.0))

    def test_mass_conserved_across_bin_counts(self, default_table):
        values = synthetic_magnitudes(default_table, 2, 5000)
        for bins in (10, 30, 50):
            spec = HistogramSpec(bin_count=bins, lo=float(values.min()), hi=float(values.max()))
            hist = histogram(values, spec)
            assert float(np.sum(hist.densities) * hist.bin_width) == pytest.approx(1.0, abs=1e-9)


class TestOverlay:
    def test_model_column_is_exact_pdf_query(self, default_table):
        trunc = truncate(default_table.reflected(), -2.0, 3.0)
        draws = sample(trunc, 2000, seed=1)
        hist = histogram(draws, HistogramSpec(bin_count=20, lo=-2.0, hi=3.0))
        record = overlay(hist, trunc)
        assert np.array_equal(record.model_density, trunc.pdf(hist.centers))

    def test_empty_bins_carry_sentinel(self, default_table):
        trunc = truncate(default_table.reflected(), -2.0, 3.0)
        values = np.full(100, 0.1)
        hist = histogram(values, HistogramSpec(bin_count=25, lo=-2.0, hi=3.0))
        record = overlay(hist, trunc)
        assert any(entry is None for entry in record.log10_hist)
        assert all(entry is None or np.isfinite(entry) for entry in record.log10_hist)

    def test_monte_carlo_collapse(self, default_table):
        trunc = truncate(default_table.reflected(), -2.2, 3.8)
        draws = sample(trunc, 100000, seed=17)
        spec = HistogramSpec(bin_count=50, lo=float(draws.min()), hi=float(draws.max()))
        hist = histogram(draws, spec)
        record = overlay(hist, trunc)
        counts = hist.densities * hist.bin_width * draws.size
        populated = counts >= 100
        deviation = np.abs(
            record.hist_density[populated] - record.model_density[populated]
        ) / record.model_density[populated]
        assert float(deviation.mean()) < 0.10


class TestTransformedPdf:
    def test_coefficient_identities(self, default_table):
        _, fset, trunc = analysis_pair(default_table, count=5000)
        tp = transformed_pdf(fset, trunc)
        assert tp.coef_b == pytest.approx(1.0 / fset.sigma_alpha, rel=1e-15)
        assert tp.coef_c == pytest.approx(fset.mu_alpha / fset.sigma_alpha, rel=1e-15)
        assert tp.coef_a == pytest.approx(
            fset.alpha / (fset.sigma_alpha * trunc.mass), rel=1e-15
        )
        assert tp.paper_coef_a == pytest.approx(fset.alpha / fset.mu_alpha, rel=1e-15)
        assert tp.mass == trunc.mass

    def test_integrates_to_one(self, default_table):
        _, fset, trunc = analysis_pair(default_table)
        tp = transformed_pdf(fset, trunc)
        assert graded_integral(tp) == pytest.approx(1.0, abs=1e-4)

    def test_only_formula_prefactor_normalizes(self, default_table):
        _, fset, trunc = analysis_pair(default_table)
        tp = transformed_pdf(fset, trunc)
        ratio = tp.paper_coef_a / tp.coef_a
        assert graded_integral(tp) * ratio == pytest.approx(ratio, rel=1e-6)
        assert abs(ratio - 1.0) > 0.2  # alpha/mu is far from the normalizing value

    def test_round_trip_cdf(self, default_table):
        magnitudes, fset, trunc = analysis_pair(default_table, count=3000)
        tp = transformed_pdf(fset, trunc)
        pushed = trunc.cdf(fset.values)
        direct = tp.cdf(magnitudes)
        assert np.abs(pushed - direct).max() < 1e-9

    def test_zero_outside_support(self, default_table):
        _, fset, trunc = analysis_pair(default_table, count=3000)
        tp = transformed_pdf(fset, trunc)
        lo, hi = tp.support
        assert tp.pdf(lo * 0.5) == 0.0
        assert tp.pdf(hi * 1.5) == 0.0
        assert tp.pdf(-1.0) == 0.0
        assert tp.pdf(0.0) == 0.0

    def test_mismatched_truncation_rejected(self, default_table):
        _, fset, _ = analysis_pair(default_table, count=3000)
        other = oriented_truncation(default_table, fset.l_min - 0.5, fset.r_max)
        with pytest.raises(InvalidParameterError):
            transformed_pdf(fset, other)


class TestReturnCollapse:
    def test_model_column_matches_pdf(self, default_table):
        magnitudes, fset, trunc = analysis_pair(default_table, count=3000)
        tp = transformed_pdf(fset, trunc)
        spec = HistogramSpec(
            bin_count=30, lo=float(magnitudes.min()), hi=float(magnitudes.max())
        )
        record = return_collapse(magnitudes, tp, spec)
        hist = histogram(magnitudes, spec)
        assert np.array_equal(record.model_density, tp.pdf(hist.centers))

    def test_monte_carlo_round_trip(self, default_table):
        magnitudes, fset, trunc = analysis_pair(default_table)
        tp = transformed_pdf(fset, trunc)
        spec = HistogramSpec(
            bin_count=50, lo=float(magnitudes.min()), hi=float(magnitudes.max())
        )
        record = return_collapse(magnitudes, tp, spec)
        counts = record.hist_density * record.bin_width * magnitudes.size
        populated = counts >= 100
        deviation = np.abs(
            record.hist_density[populated] - record.model_density[populated]
        ) / record.model_density[populated]
        assert float(deviation.mean()) < 0.10


class TestReport:
    def build(self, default_table):
        magnitudes, fset, trunc = analysis_pair(default_table, count=2000)
        tp = transformed_pdf(fset, trunc)
        spec = HistogramSpec(bin_count=12, lo=fset.l_min, hi=fset.r_max)
        record = overlay(histogram(fset.values, spec), trunc)
        ks_result = ks_test(fset.values, trunc.cdf)
        grid = np.linspace(fset.l_min, fset.r_max, 31)
        from bhpcollapse.ks import distance_curve

        xs, dist = distance_curve(fset.values, trunc.cdf, grid)
        return report(
            meta={"tool": "bhpcollapse", "version": "test", "command": "analyze",
                  "config": {"alpha": ALPHA0}},
            counts={"n_returns": 2000, "n_positive": 2000, "n_negative": 0, "n_zero": 0},
            stats={"positive": stats_section(fset)},
            transformed={"positive": transformed_section(tp)},
            histograms={"positive": {"fluctuations": collapse_section(record)}},
            distance_curves={"positive": distance_section(xs, dist, ks_result)},
        )

    def test_byte_identical_rebuild(self, default_table):
        assert self.build(default_table) == self.build(default_table)

    def test_sections_and_flags(self, default_table):
        document = json.loads(self.build(default_table))
        assert list(document)[:2] == ["meta", "counts"]
        transformed = document["transformed_positive"]
        flag = transformed["prefactor_discrepancy"]
        assert flag["published_prefactor_matches_alpha_over_mu"] is True
        assert transformed["paper_coef_a"] == pytest.approx(
            ALPHA0 / document["stats_positive"]["mu"], rel=1e-12
        )
        assert flag["relative_gap"] > 0.2

    def test_valid_json_without_nan(self, default_table):
        text = self.build(default_table)
        document = json.loads(text)  # strict JSON: would fail on bare NaN
        hist = document["histograms_positive"]["fluctuations"]
        for entry in hist["log10_hist"]:
            assert entry is None or isinstance(entry, float)


class TestTsvExport:
    def test_format(self, default_table, tmp_path):
        magnitudes, fset, trunc = analysis_pair(default_table, count=2000)
        spec = HistogramSpec(bin_count=12, lo=fset.l_min, hi=fset.r_max)
        record = overlay(histogram(fset.values, spec), trunc)
        path = tmp_path / "collapse.tsv"
        write_collapse_tsv(record, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 13
        first = lines[1].split("\t")
        assert len(first) == 3
        assert float(first[0]) == pytest.approx(record.centers[0])
