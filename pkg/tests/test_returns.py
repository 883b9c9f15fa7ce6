"""Tests of price ingestion, return computation, and fluctuation statistics."""

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhpcollapse.errors import (
    DegenerateDataError,
    InputFormatError,
    InsufficientDataError,
    InvalidParameterError,
)
from bhpcollapse.returns import (
    NEGATIVE,
    POSITIVE,
    PriceSeries,
    ReturnSeries,
    compute_returns,
    fluctuations,
    load_price_csv,
    partition,
    rescale_stats,
)


def make_prices(closes):
    start = dt.date(2001, 1, 1)
    dates = tuple(start + dt.timedelta(days=i) for i in range(len(closes)))
    return PriceSeries(dates=dates, closes=np.asarray(closes, dtype=float))


class TestComputeReturns:
    def test_constant_series(self):
        assert compute_returns(make_prices([100, 100, 100])).values.tolist() == [0.0, 0.0]

    def test_hand_example(self):
        values = compute_returns(make_prices([100, 110, 99])).values
        assert values == pytest.approx([0.10, -0.10], abs=1e-15)

    def test_dates_shift_to_later_day(self):
        prices = make_prices([100, 101])
        returns = compute_returns(prices)
        assert returns.dates == (prices.dates[1],)

    def test_single_price_rejected(self):
        with pytest.raises(InsufficientDataError):
            make_prices([100])

    def test_nonpositive_close_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_prices([100, -5])

    def test_returns_above_minus_one(self):
        values = compute_returns(make_prices([100, 1, 50])).values
        assert (values > -1.0).all()


class TestCsvLoading:
    def write(self, tmp_path, text):
        path = tmp_path / "prices.csv"
        path.write_text(text)
        return path

    def test_valid_file_with_extra_columns(self, tmp_path):
        path = self.write(
            tmp_path,
            "date,open,close\n2001-01-01,9,10.5\n2001-01-02,10,11.25\n",
        )
        prices = load_price_csv(path)
        assert prices.closes.tolist() == [10.5, 11.25]
        assert prices.dates[0] == dt.date(2001, 1, 1)

    def test_missing_close_column(self, tmp_path):
        path = self.write(tmp_path, "date,value\n2001-01-01,10\n")
        with pytest.raises(InputFormatError, match="close"):
            load_price_csv(path)

    def test_bad_date_reports_line(self, tmp_path):
        path = self.write(
            tmp_path, "date,close\n2001-01-01,10\n01/02/2001,11\n"
        )
        with pytest.raises(InputFormatError, match="line 3"):
            load_price_csv(path)

    def test_bad_close_reports_line(self, tmp_path):
        path = self.write(tmp_path, "date,close\n2001-01-01,ten\n")
        with pytest.raises(InputFormatError, match="line 2"):
            load_price_csv(path)

    def test_descending_dates_reports_line(self, tmp_path):
        path = self.write(
            tmp_path,
            "date,close\n2001-01-05,10\n2001-01-04,11\n",
        )
        with pytest.raises(InputFormatError, match="line 3"):
            load_price_csv(path)

    def test_duplicate_date_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            "date,close\n2001-01-05,10\n2001-01-05,11\n",
        )
        with pytest.raises(InputFormatError, match="line 3"):
            load_price_csv(path)

    def test_nonpositive_close_reports_line(self, tmp_path):
        path = self.write(tmp_path, "date,close\n2001-01-01,10\n2001-01-02,0\n")
        with pytest.raises(InputFormatError, match="line 3"):
            load_price_csv(path)

    def test_single_row_insufficient(self, tmp_path):
        path = self.write(tmp_path, "date,close\n2001-01-01,10\n")
        with pytest.raises(InsufficientDataError):
            load_price_csv(path)


class TestPartition:
    def test_sign_split(self):
        returns = ReturnSeries(
            dates=(dt.date(2001, 1, 2), dt.date(2001, 1, 3), dt.date(2001, 1, 4)),
            values=np.array([0.10, -0.10, 0.0]),
        )
        positives, negatives, zeros = partition(returns)
        assert positives.tolist() == [0.10]
        assert negatives.tolist() == [0.10]
        assert zeros == 1

    @given(
        st.lists(
            st.floats(min_value=-0.5, max_value=0.5, allow_nan=False),
            min_size=1,
            max_size=200,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_counts_conserved(self, values):
        returns = ReturnSeries(
            dates=tuple(dt.date(2001, 1, 1) + dt.timedelta(days=i) for i in range(len(values))),
            values=np.asarray(values),
        )
        positives, negatives, zeros = partition(returns)
        assert positives.size + negatives.size + zeros == len(values)
        assert (positives > 0).all()
        assert (negatives > 0).all()


class TestRescaleStats:
    def test_constant_magnitudes_degenerate(self):
        with pytest.raises(DegenerateDataError):
            rescale_stats([0.02, 0.02, 0.02], alpha=0.5)

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            rescale_stats([], alpha=0.5)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(InvalidParameterError):
            rescale_stats([0.01, 0.02], alpha=0.0)

    def test_nonpositive_magnitudes_rejected(self):
        with pytest.raises(InvalidParameterError):
            rescale_stats([0.01, -0.02], alpha=0.5)

    def test_population_convention(self):
        magnitudes = np.array([0.01, 0.02, 0.04])
        mu, sigma = rescale_stats(magnitudes, alpha=0.5)
        powered = magnitudes**0.5
        assert mu == pytest.approx(powered.mean(), abs=1e-15)
        # divisor m, not m - 1
        assert sigma == pytest.approx(powered.std(ddof=0), rel=1e-12)


class TestFluctuations:
    def test_normalization_identity(self):
        rng = np.random.default_rng(5)
        magnitudes = rng.lognormal(mean=-3.0, sigma=0.5, size=400)
        fset = fluctuations(magnitudes, alpha=0.55)
        assert abs(fset.values.mean()) < 1e-12
        assert abs(fset.values.std(ddof=0) - 1.0) < 1e-12
        assert fset.l_min == fset.values.min()
        assert fset.r_max == fset.values.max()
        assert fset.l_min < 0.0 < fset.r_max

    def test_alpha_one_is_plain_standardization(self):
        rng = np.random.default_rng(6)
        magnitudes = rng.uniform(0.001, 0.09, size=300)
        fset = fluctuations(magnitudes, alpha=1.0)
        direct = (magnitudes - magnitudes.mean()) / magnitudes.std(ddof=0)
        assert np.abs(fset.values - direct).max() < 1e-12

    @given(st.floats(min_value=0.1, max_value=100.0), st.floats(min_value=0.2, max_value=2.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_equivariance(self, scale, alpha):
        rng = np.random.default_rng(9)
        magnitudes = rng.uniform(0.001, 0.09, size=150)
        base = fluctuations(magnitudes, alpha=alpha)
        scaled = fluctuations(scale * magnitudes, alpha=alpha)
        assert np.abs(base.values - scaled.values).max() < 1e-9

    def test_rank_preservation(self):
        rng = np.random.default_rng(10)
        magnitudes = rng.uniform(0.001, 0.09, size=200)
        for alpha in (0.3, 0.55, 1.7):
            fset = fluctuations(magnitudes, alpha=alpha)
            assert np.array_equal(np.argsort(fset.values), np.argsort(magnitudes))

    def test_sign_label_and_validation(self):
        magnitudes = [0.01, 0.02, 0.03]
        assert fluctuations(magnitudes, 0.5, POSITIVE).sign == POSITIVE
        assert fluctuations(magnitudes, 0.5, NEGATIVE).sign == NEGATIVE
        with pytest.raises(InvalidParameterError):
            fluctuations(magnitudes, 0.5, "sideways")
        with pytest.raises(InvalidParameterError):
            fluctuations(magnitudes, 2.5)
