"""One-sample Kolmogorov-Smirnov machinery against an arbitrary model cdf.

The statistic is the supremum distance between the empirical distribution of
a sample and a continuous model cdf F, computed over the order statistics
x_(1) <= ... <= x_(n):

    D = max_i max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|)

The P value uses the asymptotic Kolmogorov distribution with the Stephens
small-sample correction,

    lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D
    Q(lambda) = 2 * sum_{k>=1} (-1)^(k-1) * exp(-2 k^2 lambda^2),

the alternating series truncated once a term drops below 1e-12.  Note the
classical caveat: when location/scale were estimated from the same sample the
classical P value is inflated (Lilliefors effect); this module implements the
classical test and leaves that interpretation to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError

# Below this argument the survival series is 1 to double precision and its
# alternating form needs thousands of near-unit terms, so short-circuit.
_SERIES_ARG_FLOOR = 1e-3
_SERIES_TERM_FLOOR = 1e-12


@dataclass(frozen=True)
class KsResult:
    """KS statistic, sample size, P value, and the point attaining the supremum."""

    d_stat: float
    n: int
    p_value: float
    d_location: float


class EmpiricalCdf:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, sample):
        values = np.sort(np.asarray(sample, dtype=float).ravel())
        if values.size == 0:
            raise InsufficientDataError("empirical cdf needs a nonempty sample")
        self._sorted = values
        self.n = int(values.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        ranks = np.searchsorted(self._sorted, np.atleast_1d(x), side="right")
        out = ranks / self.n
        return float(out[0]) if scalar else out


def empirical_cdf(sample) -> EmpiricalCdf:
    """Step function valued k/n immediately after the k-th order statistic."""
    return EmpiricalCdf(sample)


def _model_values(model_cdf, xs: np.ndarray) -> np.ndarray:
    """Evaluate a model cdf that may or may not accept arrays."""
    try:
        values = np.asarray(model_cdf(xs), dtype=float)
        if values.shape == xs.shape:
            return values
    except (TypeError, ValueError):
        pass
    return np.asarray([float(model_cdf(float(v))) for v in xs])


def ks_statistic(sample, model_cdf) -> tuple[float, float]:
    """Supremum distance D and the sample point attaining it.

    ``model_cdf`` must be non-decreasing with values in [0, 1].  Ties in the
    sample are handled by the order-statistic formula without correction.
    """
    xs = np.sort(np.asarray(sample, dtype=float).ravel())
    if xs.size == 0:
        raise InsufficientDataError("KS statistic needs a nonempty sample")
    n = xs.size
    model = _model_values(model_cdf, xs)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    gaps = np.maximum(np.abs(upper - model), np.abs(lower - model))
    index = int(np.argmax(gaps))
    return float(gaps[index]), float(xs[index])


def kolmogorov_survival(lam: float) -> float:
    """Two-sided asymptotic KS survival function Q(lambda), clamped to [0, 1]."""
    if lam < 0.0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    if lam <= _SERIES_ARG_FLOOR:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * (k * lam) ** 2)
        if term < _SERIES_TERM_FLOOR:
            break
        total += sign * term
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_pvalue(d_stat: float, n: int) -> float:
    """P value of a one-sample KS statistic for sample size ``n``."""
    if not 0.0 <= d_stat <= 1.0:
        raise InvalidParameterError(f"d_stat must lie in [0, 1], got {d_stat}")
    if n < 1:
        raise InvalidParameterError(f"sample size must be >= 1, got {n}")
    root = math.sqrt(n)
    lam = (root + 0.12 + 0.11 / root) * d_stat
    return kolmogorov_survival(lam)


def ks_test(sample, model_cdf) -> KsResult:
    """Statistic, location, and P value in one call."""
    xs = np.asarray(sample, dtype=float).ravel()
    d_stat, d_location = ks_statistic(xs, model_cdf)
    return KsResult(
        d_stat=d_stat,
        n=int(xs.size),
        p_value=ks_pvalue(d_stat, int(xs.size)),
        d_location=d_location,
    )


def distance_curve(sample, model_cdf, grid) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise |F_empirical - F_model| on ``grid``.

    Evaluated on a grid refined with ``refined_grid`` the maximum recovers the
    KS statistic.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise InvalidParameterError("distance curve needs a nonempty grid")
    emp = empirical_cdf(sample)
    return grid, np.abs(emp(grid) - _model_values(model_cdf, grid))


def refined_grid(sample, grid=None) -> np.ndarray:
    """Union of a base grid with the order statistics and their left limits.

    Including the point just below each order statistic exposes the
    (i-1)/n side of the empirical step, so the supremum over the refined grid
    equals the KS statistic up to one model ulp.
    """
    xs = np.asarray(sample, dtype=float).ravel()
    pieces = [xs, np.nextafter(xs, -np.inf)]
    if grid is not None:
        pieces.append(np.asarray(grid, dtype=float).ravel())
    return np.unique(np.concatenate(pieces))
