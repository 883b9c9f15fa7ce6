"""Grid search for the rescaling exponent maximizing the KS P value.

For each candidate exponent alpha the magnitudes are rescaled and
standardized, the BHP distribution is truncated to the observed fluctuation
range, and the one-sample KS test is run against the truncated cdf.  Return
magnitudes produce right-skewed fluctuation sets (rare large days on the
positive side), so the comparison uses the mirrored orientation of the
tabulated curve, whose exponential tail faces the large positive values; see
``BhpTable.reflected``.

The scan reports the whole P-value curve and its argmax; ``refine`` bisects
the grid around the argmax down to a target resolution.  The P value is a
noisy, step-like function of alpha, so plain grid search (rather than a
smooth optimizer) is the appropriate tool.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bhp import BhpTable, TruncatedBhp, truncate
from .errors import BhpCollapseError, InvalidParameterError, ScanFailedError
from .ks import KsResult, ks_test
from .returns import POSITIVE, FluctuationSet, fluctuations


@dataclass(frozen=True)
class ScanResult:
    """P-value curve over an alpha grid and the best-fitting exponent."""

    sign: str
    alphas: np.ndarray
    p_values: np.ndarray
    d_stats: np.ndarray
    alpha_star: float
    p_star: float
    best_set: FluctuationSet
    failures: tuple[tuple[float, str], ...] = ()

    @property
    def grid_step(self) -> float:
        if self.alphas.size < 2:
            return 0.0
        return float(np.diff(self.alphas).min())


def oriented_truncation(table: BhpTable, lower: float, upper: float) -> TruncatedBhp:
    """Truncation of the data-facing (mirrored) orientation of the table."""
    return truncate(table.reflected(), lower, upper)


def evaluate_alpha(magnitudes, alpha: float, table: BhpTable,
                   sign: str = POSITIVE) -> tuple[KsResult, FluctuationSet]:
    """KS test of the alpha-fluctuations against the range-truncated BHP cdf.

    ``table`` is the tabulated density in its native orientation; the test
    itself runs against the mirrored curve truncated to [l_min, r_max] of the
    fluctuation set.
    """
    fset = fluctuations(magnitudes, alpha, sign)
    trunc = oriented_truncation(table, fset.l_min, fset.r_max)
    return ks_test(fset.values, trunc.cdf), fset


def _evaluate_many(magnitudes, alphas, table, sign, workers):
    """Evaluate a batch of exponents; results keep the input order."""

    def one(alpha):
        try:
            return evaluate_alpha(magnitudes, alpha, table, sign)
        except BhpCollapseError as exc:
            return exc

    if workers <= 1 or len(alphas) <= 1:
        return [one(a) for a in alphas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, alphas))


def _argmax_first(p_values: np.ndarray) -> int:
    return int(np.argmax(p_values))


def scan(magnitudes, alpha_min: float, alpha_max: float, step: float,
         table: BhpTable, *, sign: str = POSITIVE, workers: int = 1) -> ScanResult:
    """Evaluate every grid exponent in [alpha_min, alpha_max] and take the argmax.

    Ties break toward the smallest alpha.  Individual grid points may fail
    (degenerate data, empty truncation); they are dropped from the curves and
    recorded in ``failures``.  If every point fails, ScanFailedError carries
    the aggregated causes.
    """
    if not 0.0 < alpha_min < alpha_max:
        raise InvalidParameterError(
            f"need 0 < alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]"
        )
    if not 0.0 < step <= (alpha_max - alpha_min) / 4.0:
        raise InvalidParameterError(
            f"step must lie in (0, (alpha_max - alpha_min)/4], got {step}"
        )
    count = int(np.floor((alpha_max - alpha_min) / step + 1e-9)) + 1
    alphas = alpha_min + step * np.arange(count)
    outcomes = _evaluate_many(magnitudes, alphas, table, sign, workers)

    kept_alphas, p_values, d_stats, fsets = [], [], [], []
    failures: list[tuple[float, str]] = []
    for alpha, outcome in zip(alphas, outcomes):
        if isinstance(outcome, BhpCollapseError):
            failures.append((float(alpha), str(outcome)))
            continue
        result, fset = outcome
        kept_alphas.append(float(alpha))
        p_values.append(result.p_value)
        d_stats.append(result.d_stat)
        fsets.append(fset)
    if not kept_alphas:
        raise ScanFailedError(
            "every alpha grid point failed", [msg for _, msg in failures]
        )
    p_arr = np.asarray(p_values)
    best = _argmax_first(p_arr)
    return ScanResult(
        sign=sign,
        alphas=np.asarray(kept_alphas),
        p_values=p_arr,
        d_stats=np.asarray(d_stats),
        alpha_star=kept_alphas[best],
        p_star=float(p_arr[best]),
        best_set=fsets[best],
        failures=tuple(failures),
    )


def refine(magnitudes, coarse: ScanResult, table: BhpTable, target_width: float,
           *, workers: int = 1) -> ScanResult:
    """Bisect the grid around the coarse argmax until its width <= target_width.

    Each halving evaluates the two neighbors of the current argmax (within the
    coarse scan's range) and the argmax is recomputed over everything
    evaluated so far, so the refined P value can never fall below the coarse
    one.  With target_width >= the coarse step the coarse result is returned
    unchanged.
    """
    if target_width <= 0.0:
        raise InvalidParameterError(f"target_width must be positive, got {target_width}")
    step = coarse.grid_step
    if step == 0.0 or target_width >= step:
        return coarse

    evaluated: dict[float, tuple[float, float]] = {
        float(a): (float(p), float(d))
        for a, p, d in zip(coarse.alphas, coarse.p_values, coarse.d_stats)
    }
    failures = list(coarse.failures)
    lo = float(coarse.alphas[0])
    hi = float(coarse.alphas[-1])
    alpha_star = coarse.alpha_star
    width = step
    while width > target_width:
        width *= 0.5
        candidates = [alpha_star - width, alpha_star + width]
        todo = [a for a in candidates if lo <= a <= hi and a not in evaluated]
        outcomes = _evaluate_many(magnitudes, todo, table, coarse.sign, workers)
        for alpha, outcome in zip(todo, outcomes):
            if isinstance(outcome, BhpCollapseError):
                failures.append((alpha, str(outcome)))
                continue
            result, _ = outcome
            evaluated[alpha] = (result.p_value, result.d_stat)
        ordered = sorted(evaluated)
        p_list = [evaluated[a][0] for a in ordered]
        alpha_star = ordered[_argmax_first(np.asarray(p_list))]

    ordered = sorted(evaluated)
    alphas = np.asarray(ordered)
    p_values = np.asarray([evaluated[a][0] for a in ordered])
    d_stats = np.asarray([evaluated[a][1] for a in ordered])
    best = _argmax_first(p_values)
    _, best_set = evaluate_alpha(magnitudes, alphas[best], table, coarse.sign)
    return ScanResult(
        sign=coarse.sign,
        alphas=alphas,
        p_values=p_values,
        d_stats=d_stats,
        alpha_star=float(alphas[best]),
        p_star=float(p_values[best]),
        best_set=best_set,
        failures=tuple(failures),
    )
