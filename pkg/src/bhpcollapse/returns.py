"""Daily price ingestion and power-rescaled fluctuation statistics.

A price series Y(t) yields simple daily returns r(t) = (Y(t) - Y(t-1)) /
Y(t-1).  Positive and negative returns are analyzed separately: the sign is
stripped, each magnitude v is raised to an exponent alpha, and the rescaled
values are standardized with the population-convention mean and standard
deviation

    mu_alpha    = mean(v^alpha)
    sigma_alpha = sqrt(mean(v^(2*alpha)) - mu_alpha^2)

producing the dimensionless fluctuations (v^alpha - mu_alpha) / sigma_alpha.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    InputFormatError,
    InsufficientDataError,
    InvalidParameterError,
)

POSITIVE = "positive"
NEGATIVE = "negative"
SIGNS = (POSITIVE, NEGATIVE)


@dataclass(frozen=True)
class PriceSeries:
    """Dated close values in strictly increasing date order."""

    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise InvalidParameterError("dates and closes must have equal length")
        if len(self.dates) < 2:
            raise InsufficientDataError(
                f"need at least 2 prices, got {len(self.dates)}"
            )
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidParameterError("dates must be strictly increasing")
        if (np.asarray(self.closes) <= 0).any():
            raise InvalidParameterError("all closes must be positive")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Daily returns, each dated at the later of its two days."""

    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class FluctuationSet:
    """One sign's standardized alpha-rescaled fluctuations and their statistics."""

    sign: str
    alpha: float
    values: np.ndarray
    count: int
    mu_alpha: float
    sigma_alpha: float
    l_min: float
    r_max: float


def load_price_csv(path) -> PriceSeries:
    """Parse a ``date,close`` CSV with a header row into a PriceSeries.

    Dates must be ISO-8601 and strictly ascending; closes must be positive.
    Extra columns are ignored.  Violations raise InputFormatError naming the
    offending 1-based line number.
    """
    dates: list[dt.date] = []
    closes: list[float] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        columns = [name.strip().lower() for name in header]
        try:
            date_col = columns.index("date")
            close_col = columns.index("close")
        except ValueError:
            raise InputFormatError(
                f"{path}: line 1: header must contain 'date' and 'close' columns, got {header}"
            ) from None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) <= max(date_col, close_col):
                raise InputFormatError(f"{path}: line {lineno}: too few columns")
            try:
                day = dt.date.fromisoformat(row[date_col].strip())
            except ValueError:
                raise InputFormatError(
                    f"{path}: line {lineno}: invalid ISO-8601 date {row[date_col]!r}"
                ) from None
            try:
                close = float(row[close_col])
            except ValueError:
                raise InputFormatError(
                    f"{path}: line {lineno}: invalid close value {row[close_col]!r}"
                ) from None
            if not math.isfinite(close) or close <= 0.0:
                raise InputFormatError(
                    f"{path}: line {lineno}: close must be a positive finite number, got {close}"
                )
            if dates and day <= dates[-1]:
                raise InputFormatError(
                    f"{path}: line {lineno}: date {day.isoformat()} not after previous row"
                )
            dates.append(day)
            closes.append(close)
    if len(dates) < 2:
        raise InsufficientDataError(f"{path}: need at least 2 data rows, got {len(dates)}")
    return PriceSeries(dates=tuple(dates), closes=np.asarray(closes, dtype=float))


def compute_returns(prices: PriceSeries) -> ReturnSeries:
    """Simple daily returns (Y(t) - Y(t-1)) / Y(t-1), dated at day t."""
    if len(prices) < 2:
        raise InsufficientDataError("need at least 2 prices to form a return")
    closes = np.asarray(prices.closes, dtype=float)
    values = np.diff(closes) / closes[:-1]
    return ReturnSeries(dates=tuple(prices.dates[1:]), values=values)


def partition(returns: ReturnSeries) -> tuple[np.ndarray, np.ndarray, int]:
    """Split returns into positive magnitudes, negated-negative magnitudes, and a zero count.

    Zero returns belong to neither side; they are counted and returned so
    callers can report them rather than drop them silently.
    """
    values = np.asarray(returns.values, dtype=float)
    positives = values[values > 0.0]
    negatives = -values[values < 0.0]
    zero_count = int((values == 0.0).sum())
    return positives, negatives, zero_count


def rescale_stats(magnitudes, alpha: float) -> tuple[float, float]:
    """Population mean and standard deviation of the alpha-rescaled magnitudes.

    Implements mu = mean(v^alpha) and sigma = sqrt(mean(v^(2 alpha)) - mu^2)
    with divisor m (population convention), exactly as the fluctuation
    definition requires.
    """
    magnitudes = np.asarray(magnitudes, dtype=float)
    if magnitudes.size == 0:
        raise InsufficientDataError("cannot rescale an empty magnitude list")
    if alpha <= 0.0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    if (magnitudes <= 0.0).any():
        raise InvalidParameterError("magnitudes must all be positive")
    # summing in sorted order makes the statistics exactly permutation-invariant
    ordered = np.sort(magnitudes)
    mu = float((ordered**alpha).mean())
    variance = float((ordered ** (2.0 * alpha)).mean()) - mu * mu
    sigma = math.sqrt(max(variance, 0.0))
    if sigma == 0.0:
        raise DegenerateDataError(
            "magnitudes have zero dispersion after rescaling; cannot standardize"
        )
    return mu, sigma


def fluctuations(magnitudes, alpha: float, sign: str = POSITIVE) -> FluctuationSet:
    """Standardized alpha-rescaled fluctuations of one sign's magnitudes."""
    if sign not in SIGNS:
        raise InvalidParameterError(f"sign must be one of {SIGNS}, got {sign!r}")
    if not 0.0 < alpha <= 2.0:
        raise InvalidParameterError(f"alpha must lie in (0, 2], got {alpha}")
    magnitudes = np.asarray(magnitudes, dtype=float)
    mu, sigma = rescale_stats(magnitudes, alpha)
    values = (magnitudes**alpha - mu) / sigma
    return FluctuationSet(
        sign=sign,
        alpha=float(alpha),
        values=values,
        count=int(values.size),
        mu_alpha=mu,
        sigma_alpha=sigma,
        l_min=float(values.min()),
        r_max=float(values.max()),
    )
