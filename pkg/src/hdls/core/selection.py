"""
Submodel selection: Stage-1 screening by the high-dimensional OLS ranking
(fixed size or extended BIC over the nested path) and Stage-2 hard
thresholding (analytic or Gaussian threshold, or BIC over nested models).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from hdls.core.errors import InvalidDimensions, NumericalError
from hdls.core.linalg import Coefficients, as_design, as_response, ols_refit

logger = logging.getLogger(__name__)

# RSS values are floored at this fraction of ||y||^2 before taking logs.
RSS_FLOOR = 1e-20

VectorLike = Union[Coefficients, np.ndarray]


def _as_vector(beta: VectorLike) -> np.ndarray:
    if isinstance(beta, Coefficients):
        beta = beta.beta
    return np.asarray(beta, dtype=np.float64).ravel()


def default_ebic_path_length(n: int) -> int:
    """min(n - 1, floor(n / log n)) nested models for Stage-1 eBIC."""
    return max(1, min(n - 1, int(n // math.log(n))))


@dataclass(frozen=True)
class FixedSize:
    """Stage 1: keep the d largest |beta_HD|. d = None means floor(0.3 n)."""

    d: Optional[int] = None

    def resolve(self, n: int, p: int) -> int:
        """
        Screen size for an (n, p) problem.

        Returns
        -------
        d:
            min(d, p), checked to satisfy 1 <= d < n.
        """
        d = self.d if self.d is not None else int(math.floor(0.3 * n))
        d = min(d, p)
        if d < 1 or d >= n:
            raise InvalidDimensions(f"Stage-1 size d = {d} must satisfy 1 <= d < n = {n}.")
        return d


@dataclass(frozen=True)
class EBIC:
    """Stage 1: extended BIC over the nested ranked path."""

    gamma: float = 1.0
    max_size: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"eBIC gamma must lie in [0, 1], got {self.gamma}.")

    def resolve(self, n: int, p: int) -> int:
        """Length of the nested path, capped at p and checked against n - 1."""
        size = self.max_size if self.max_size is not None else default_ebic_path_length(n)
        size = min(size, p)
        if size < 0 or size > n - 1:
            raise InvalidDimensions(f"eBIC max_size = {size} must lie in [0, n - 1 = {n - 1}].")
        return size


@dataclass(frozen=True)
class AnalyticThreshold:
    """Stage 2: gamma' = mean(sqrt(2 sigma2 Cbar_ii log(4d / delta)))."""

    delta: float = 0.5

    def __post_init__(self):
        _check_delta(self.delta)


@dataclass(frozen=True)
class GaussianThreshold:
    """Stage 2: gamma' = 8 sqrt(2) sigma sqrt(2 kappa log(4d / delta) / n)."""

    delta: float = 0.5
    kappa: float = 1.0

    def __post_init__(self):
        _check_delta(self.delta)
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}.")


@dataclass(frozen=True)
class BIC:
    """Stage 2: BIC over nested models ranked by |beta_OLS| in the submodel."""

    max_size: Optional[int] = None


def _check_delta(delta: float):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}.")


Stage1Rule = Union[FixedSize, EBIC]
Stage2Rule = Union[AnalyticThreshold, GaussianThreshold, BIC]


@dataclass(frozen=True)
class SelectionRule:
    """Stage-1 and Stage-2 strategy of a LAT/RAT fit."""

    stage1: Stage1Rule = field(default_factory=FixedSize)
    stage2: Stage2Rule = field(default_factory=AnalyticThreshold)

    def validate(self, n: int, p: int):
        """Checks the rule against the data shape (d < n, max_size <= n - 1)."""
        self.stage1.resolve(n, p)
        if isinstance(self.stage2, BIC) and self.stage2.max_size is not None:
            if not 0 <= self.stage2.max_size <= n - 1:
                raise InvalidDimensions(
                    f"BIC max_size = {self.stage2.max_size} must lie in [0, n - 1]."
                )

    def describe(self) -> dict:
        """Rule kinds and parameters, for result records."""
        return {
            "stage1": {"kind": type(self.stage1).__name__, **vars(self.stage1)},
            "stage2": {"kind": type(self.stage2).__name__, **vars(self.stage2)},
        }


@dataclass
class RankedModelPath:
    """
    Column indices sorted by decreasing |score|, ties by lower index.

    Parameters
    ----------
    order:
        Ranked column indices.
    scores:
        The scores the ranking was built from, in column indexing.
    """

    order: np.ndarray
    scores: np.ndarray

    def top(self, k: int) -> np.ndarray:
        """Sorted indices of the first k entries of the path."""
        return np.sort(self.order[:k])


def rank_path(beta: VectorLike, max_size: Optional[int] = None) -> RankedModelPath:
    """
    Ranks columns by decreasing absolute coefficient.

    Parameters
    ----------
    beta:
        Scores to rank.
    max_size:
        Keep only the first max_size entries of the ranking.
    """
    scores = _as_vector(beta)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(scores.size), -np.abs(scores)))
    if max_size is not None:
        order = order[:max_size]
    return RankedModelPath(order=order, scores=scores)


def rank_top_d(beta: VectorLike, d: int) -> np.ndarray:
    """
    Indices of the d largest absolute coefficients, ties broken by lower
    column index. Returned sorted.
    """
    scores = _as_vector(beta)
    if not 1 <= d <= scores.size:
        raise InvalidDimensions(f"d = {d} must lie in [1, {scores.size}].")
    return rank_path(scores).top(d)


def criterion_path(
    x, y, path: RankedModelPath, gamma: float, max_size: int
) -> Tuple[np.ndarray, List[int]]:
    """
    Extended BIC of the nested models M_k = path.order[:k], k = 0..max_size:
    n log(RSS_k / n) + k log n + 2 gamma k log p.

    Parameters
    ----------
    x:
        Design matrix (n, p) the path indexes into.
    y:
        Response vector.
    path:
        Ranked path.
    gamma:
        eBIC parameter; 0 gives the classical BIC.
    max_size:
        Largest model size evaluated, < n.

    Returns
    -------
    values:
        Criterion per k, NaN where the refit failed.
    skipped:
        Model sizes whose refit failed.
    """
    x = as_design(x)
    n, p = x.shape
    y = as_response(y, n)
    max_size = min(max_size, path.order.size)
    if max_size >= n:
        raise InvalidDimensions(f"max_size = {max_size} must be below n = {n}.")

    floor = RSS_FLOOR * max(float(y @ y), np.finfo(float).tiny)
    values = np.full(max_size + 1, np.nan)
    skipped = []
    for k in range(max_size + 1):
        support = path.order[:k]
        try:
            coef, _, _ = ols_refit(x, y, support)
        except NumericalError as e:
            logger.warning("Skipping nested model of size %d: %s", k, e)
            skipped.append(k)
            continue
        resid = y - x @ coef.beta
        rss = max(float(resid @ resid), floor)
        values[k] = n * math.log(rss / n) + k * math.log(n) + 2.0 * gamma * k * math.log(p)
        logger.debug("nested model k=%d criterion=%.6f", k, values[k])
    return values, skipped


def _argmin_smallest(values: np.ndarray) -> int:
    finite = np.isfinite(values)
    if not finite.any():
        raise NumericalError("No nested model could be refit.")
    # argmin returns the first (smallest k) minimizer
    return int(np.argmin(np.where(finite, values, np.inf)))


def ebic_select(
    x, y, path: RankedModelPath, gamma: float = 1.0, max_size: Optional[int] = None
) -> np.ndarray:
    """
    Extended-BIC choice among nested models of a ranked path.

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector.
    path:
        Ranked path over the columns of x.
    gamma:
        eBIC parameter in [0, 1].
    max_size:
        Largest model size considered. Defaults to min(n - 1, floor(n / log n)).

    Returns
    -------
    support:
        Sorted indices of the chosen model; ties go to the smaller model.
    """
    x = as_design(x)
    if max_size is None:
        max_size = default_ebic_path_length(x.shape[0])
    values, _ = criterion_path(x, y, path, gamma, max_size)
    k = _argmin_smallest(values)
    logger.info("eBIC(gamma=%.2f) selected %d of %d nested models", gamma, k, values.size - 1)
    return path.top(k)


def bic_select(x, y, path: RankedModelPath, max_size: Optional[int] = None) -> np.ndarray:
    """Classical BIC over the nested models of a ranked path (eBIC with gamma = 0)."""
    x = as_design(x)
    if max_size is None:
        max_size = min(path.order.size, x.shape[0] - 1)
    return ebic_select(x, y, path, gamma=0.0, max_size=max_size)


def analytic_threshold(
    sigma2_hat: float, cbar_diag: np.ndarray, d: int, delta: float
) -> float:
    """
    gamma' = (1 / d) sum_i sqrt(2 sigma2_hat cbar_i log(4 d / delta)).

    Parameters
    ----------
    sigma2_hat:
        Noise variance estimate (>= 0).
    cbar_diag:
        Diagonal of the (regularized) inverse Gram matrix of the submodel.
    d:
        Submodel size.
    delta:
        Confidence parameter in (0, 1).
    """
    _check_delta(delta)
    cbar_diag = np.asarray(cbar_diag, dtype=np.float64)
    if sigma2_hat < 0 or np.any(cbar_diag < 0):
        raise ValueError("sigma2_hat and cbar_diag must be nonnegative.")
    if d < 1:
        raise InvalidDimensions(f"d must be positive, got {d}.")
    terms = np.sqrt(2.0 * sigma2_hat * cbar_diag * math.log(4.0 * d / delta))
    return float(terms.sum() / d)


def gaussian_threshold(
    sigma2_hat: float, n: int, d: int, delta: float, kappa: float
) -> float:
    """Gaussian-design threshold 8 sqrt(2) sigma_hat sqrt(2 kappa log(4d / delta) / n)."""
    _check_delta(delta)
    if sigma2_hat < 0 or kappa <= 0 or n < 1 or d < 1:
        raise ValueError("Need sigma2_hat >= 0, kappa > 0, n >= 1 and d >= 1.")
    return 8.0 * math.sqrt(2.0) * math.sqrt(sigma2_hat) * math.sqrt(
        2.0 * kappa * math.log(4.0 * d / delta) / n
    )


def hard_threshold(beta: VectorLike, gamma_prime: float) -> np.ndarray:
    """Sorted indices with |beta_i| > gamma_prime (strict)."""
    if gamma_prime < 0 or math.isnan(gamma_prime):
        raise ValueError(f"Threshold must be nonnegative, got {gamma_prime}.")
    return np.flatnonzero(np.abs(_as_vector(beta)) > gamma_prime)
