"""
The three-stage LAT and RAT fitting algorithms and cross-validation of the
RAT ridge parameter.

Stage 1 standardizes the data and screens columns with the high-dimensional
OLS ranking, Stage 2 refits the screened submodel (OLS for LAT, ridge for RAT)
and hard-thresholds it, Stage 3 refits the surviving columns. Everything up to
the final de-standardization happens in standardized space.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from hdls.core.errors import InvalidDimensions, SingularSystem, SupportTooLarge
from hdls.core.linalg import (
    Coefficients,
    StandardizedData,
    as_design,
    as_response,
    hd_ols,
    ols_refit,
    ridge_refit,
    standardize,
)
from hdls.core.rng import make_rng
from hdls.core.selection import (
    BIC,
    EBIC,
    AnalyticThreshold,
    FixedSize,
    GaussianThreshold,
    SelectionRule,
    analytic_threshold,
    bic_select,
    ebic_select,
    gaussian_threshold,
    hard_threshold,
    rank_path,
)

logger = logging.getLogger(__name__)

# Stage-1 ridge term of the high-dimensional OLS estimator.
HD_RIDGE_EPS = 0.1

# Standardized coefficients at or below this size are treated as round-off.
ZERO_TOL = 1e-8


def default_r_grid(n: int, size: int = 20) -> np.ndarray:
    """Log-spaced ridge grid over [1e-4 n, 10 n]."""
    return np.logspace(math.log10(1e-4 * n), math.log10(10.0 * n), size)


@dataclass(frozen=True)
class CvConfig:
    """
    K-fold cross-validation of the ridge parameter.

    Parameters
    ----------
    folds:
        Number of folds, >= 2.
    r_grid:
        Strictly increasing positive candidates. None uses default_r_grid(n).
    scoring:
        Only "rmse" (mean out-of-fold prediction RMSE) is supported.
    seed:
        Seed of the fold assignment.
    n_jobs:
        joblib workers over folds.
    """

    folds: int = 10
    r_grid: Optional[Tuple[float, ...]] = None
    scoring: str = "rmse"
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"Cross-validation needs at least 2 folds, got {self.folds}.")
        if self.scoring != "rmse":
            raise ValueError(f"Unknown CV scoring {self.scoring!r}.")
        if self.r_grid is not None:
            grid = np.asarray(self.r_grid, dtype=np.float64)
            if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
                raise ValueError("r_grid must be nonempty, positive and strictly increasing.")

    def grid(self, n: int) -> np.ndarray:
        """Candidate ridge values for n observations."""
        if self.r_grid is None:
            return default_r_grid(n)
        return np.asarray(self.r_grid, dtype=np.float64)


@dataclass
class FitResult:
    """
    Output of a LAT/RAT fit.

    coefficients are in original units, zero off support. stage1_submodel
    and support use original column indexing. sigma2_hat and threshold_used
    live in standardized space.
    """

    method: str
    coefficients: Coefficients
    support: np.ndarray
    stage1_submodel: np.ndarray
    threshold_used: Optional[float]
    sigma2_hat: float
    ridge_r: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)
    null_model: bool = False
    cv_curve: Optional[List[Tuple[float, float]]] = None
    rule: Optional[SelectionRule] = None
    notes: List[str] = field(default_factory=list)

    def predict(self, x) -> np.ndarray:
        """Predictions in original units."""
        return self.coefficients.predict(x)

    def to_record(self, feature_names: Optional[Sequence[str]] = None) -> dict:
        """Machine-readable summary of the fit."""
        support = self.support.tolist()
        record = {
            "method": self.method,
            "support": support,
            "coefficients": self.coefficients.beta[self.support].tolist(),
            "intercept": self.coefficients.intercept,
            "stage1_submodel": self.stage1_submodel.tolist(),
            "threshold": self.threshold_used,
            "sigma2_hat": self.sigma2_hat,
            "ridge_r": self.ridge_r,
            "null_model": self.null_model,
            "timings_ms": self.timings,
            "rule": self.rule.describe() if self.rule is not None else None,
            "notes": self.notes,
        }
        if feature_names is not None:
            record["features"] = [feature_names[j] for j in support]
        if self.cv_curve is not None:
            record["cv_curve"] = [list(point) for point in self.cv_curve]
        return record


def fold_indices(n: int, folds: int, seed: int) -> List[np.ndarray]:
    """Seeded shuffle of range(n) cut into contiguous, nearly equal blocks."""
    if not 2 <= folds <= n:
        raise InvalidDimensions(f"Need 2 <= folds <= n = {n}, got {folds}.")
    order = make_rng(seed).permutation(n)
    return np.array_split(order, folds)


def _fold_scores(x: np.ndarray, y: np.ndarray, test: np.ndarray, grid: np.ndarray) -> np.ndarray:
    train = np.setdiff1d(np.arange(x.shape[0]), test, assume_unique=True)
    x_tr, y_tr = x[train], y[train]
    # One eigendecomposition per fold serves every grid point.
    evals, evecs = np.linalg.eigh(x_tr.T @ x_tr)
    proj = evecs.T @ (x_tr.T @ y_tr)
    scores = np.empty(grid.size)
    for i, r in enumerate(grid):
        beta = evecs @ (proj / (evals + r))
        resid = y[test] - x[test] @ beta
        scores[i] = math.sqrt(float(resid @ resid) / test.size)
    return scores


def cv_ridge(x_sub, y, cfg: CvConfig = CvConfig()) -> Tuple[float, List[Tuple[float, float]]]:
    """
    Chooses the ridge parameter by K-fold cross-validation.

    Parameters
    ----------
    x_sub:
        Design restricted to the candidate submodel (n, d).
    y:
        Response vector.
    cfg:
        Cross-validation settings.

    Returns
    -------
    best_r:
        Grid value with the smallest mean out-of-fold RMSE; ties go to the
        larger r.
    cv_curve:
        (r, score) for every grid point.
    """
    x_sub = as_design(x_sub)
    n, d = x_sub.shape
    y = as_response(y, n)
    if d >= n * (cfg.folds - 1) / cfg.folds:
        raise SupportTooLarge(
            f"{d} columns is too many for {cfg.folds}-fold CV with n = {n}."
        )
    grid = cfg.grid(n)
    folds = fold_indices(n, cfg.folds, cfg.seed)

    per_fold = Parallel(n_jobs=cfg.n_jobs, prefer="threads")(
        delayed(_fold_scores)(x_sub, y, test, grid) for test in folds
    )
    # Summation in fold order regardless of the schedule.
    scores = np.zeros(grid.size)
    for fold_score in per_fold:
        scores += fold_score
    scores /= len(folds)

    best = int(np.flatnonzero(scores == scores.min())[-1])
    logger.info("CV chose r = %.4g (score %.4g) over %d grid points", grid[best], scores[best], grid.size)
    return float(grid[best]), [(float(r), float(s)) for r, s in zip(grid, scores)]


class _Stopwatch:
    def __init__(self):
        self.timings: Dict[str, float] = {}
        self._start = time.perf_counter_ns()

    def lap(self, name: str):
        now = time.perf_counter_ns()
        self.timings[name] = (now - self._start) / 1e6
        self._start = now


def _stage_refit(x: np.ndarray, y: np.ndarray, support: np.ndarray, r: Optional[float]):
    if r is None:
        return ols_refit(x, y, support)
    return ridge_refit(x, y, support, r)


def _null_result(
    method: str,
    sd: StandardizedData,
    stage1_local: np.ndarray,
    threshold: Optional[float],
    sigma2_hat: float,
    r: Optional[float],
    watch: _Stopwatch,
    rule: SelectionRule,
    cv_curve,
    notes: List[str],
) -> FitResult:
    logger.warning("%s: no column survived selection; returning the null model", method)
    return FitResult(
        method=method,
        coefficients=Coefficients(np.zeros(sd.p), sd.y_mean),
        support=np.zeros(0, dtype=np.int64),
        stage1_submodel=sd.kept_cols[stage1_local],
        threshold_used=threshold,
        sigma2_hat=sigma2_hat,
        ridge_r=r,
        timings=watch.timings,
        null_model=True,
        cv_curve=cv_curve,
        rule=rule,
        notes=notes + ["empty support: null model"],
    )


def _three_stage(
    method: str,
    x,
    y,
    rule: Optional[SelectionRule],
    r: Optional[float],
    cv: Optional[CvConfig],
    zero_tol: float,
) -> FitResult:
    watch = _Stopwatch()
    notes: List[str] = []
    x = as_design(x)
    y = as_response(y, x.shape[0])
    rule = rule if rule is not None else SelectionRule()

    # Stage 1: standardize, rank by the high-dimensional OLS estimate, screen.
    sd = standardize(x, y)
    x_t, y_t = sd.x_tilde, sd.y_tilde
    n, p_kept = x_t.shape
    rule.validate(n, p_kept)
    try:
        beta_hd = hd_ols(sd, HD_RIDGE_EPS).beta[sd.kept_cols]
    except SingularSystem as e:
        raise e.with_stage("stage 1") from e
    path = rank_path(beta_hd)

    if isinstance(rule.stage1, FixedSize):
        stage1 = path.top(rule.stage1.resolve(n, p_kept))
    elif isinstance(rule.stage1, EBIC):
        stage1 = ebic_select(x_t, y_t, path, rule.stage1.gamma, rule.stage1.resolve(n, p_kept))
    else:
        raise TypeError(f"Unknown stage-1 rule {rule.stage1!r}")
    watch.lap("stage1")
    logger.info("%s stage 1: kept %d of %d columns", method, stage1.size, p_kept)

    cv_curve = None
    if stage1.size == 0:
        return _null_result(method, sd, stage1, None, float(y_t @ y_t) / n, r, watch, rule, cv_curve, notes)

    if method == "rat" and r is None:
        r, cv_curve = cv_ridge(x_t[:, stage1], y_t, cv if cv is not None else CvConfig())
        watch.lap("cv")

    # Stage 2: refit the submodel and threshold it.
    x_sub = x_t[:, stage1]
    d = stage1.size
    try:
        coef2, sigma2_hat, cbar_diag = _stage_refit(x_sub, y_t, np.arange(d), r)
    except SingularSystem as e:
        raise e.with_stage("stage 2") from e
    beta2 = coef2.beta

    stage2 = rule.stage2
    if isinstance(stage2, AnalyticThreshold):
        threshold = analytic_threshold(sigma2_hat, cbar_diag, d, stage2.delta)
        kept_local = hard_threshold(beta2, max(threshold, zero_tol))
    elif isinstance(stage2, GaussianThreshold):
        threshold = gaussian_threshold(sigma2_hat, n, d, stage2.delta, stage2.kappa)
        kept_local = hard_threshold(beta2, max(threshold, zero_tol))
    elif isinstance(stage2, BIC):
        threshold = None
        max_size = stage2.max_size if stage2.max_size is not None else d
        kept_local = bic_select(x_sub, y_t, rank_path(beta2), min(max_size, d))
    else:
        raise TypeError(f"Unknown stage-2 rule {stage2!r}")
    support_local = stage1[kept_local]
    watch.lap("stage2")
    logger.info(
        "%s stage 2: sigma2_hat=%.4g threshold=%s kept %d of %d",
        method, sigma2_hat, "BIC" if threshold is None else f"{threshold:.4g}", support_local.size, d,
    )

    if support_local.size == 0:
        return _null_result(method, sd, stage1, threshold, sigma2_hat, r, watch, rule, cv_curve, notes)

    # Stage 3: refit the selected columns, zero elsewhere, de-standardize.
    try:
        coef3, _, _ = _stage_refit(x_t, y_t, support_local, r)
    except SingularSystem as e:
        raise e.with_stage("stage 3") from e
    coefficients = sd.to_original(coef3.beta)
    watch.lap("stage3")

    return FitResult(
        method=method,
        coefficients=coefficients,
        support=sd.kept_cols[support_local],
        stage1_submodel=sd.kept_cols[stage1],
        threshold_used=threshold,
        sigma2_hat=sigma2_hat,
        ridge_r=r,
        timings=watch.timings,
        cv_curve=cv_curve,
        rule=rule,
        notes=notes,
    )


def lat(x, y, rule: Optional[SelectionRule] = None, zero_tol: float = ZERO_TOL) -> FitResult:
    """
    Least-squares adaptive thresholding.

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector (n,).
    rule:
        Selection strategy. Defaults to the d = floor(0.3 n) screen and the
        analytic threshold with delta = 0.5.
    zero_tol:
        Floor on the Stage-2 threshold in standardized units.

    Returns
    -------
    result:
        The fit; deterministic given its inputs.
    """
    return _three_stage("lat", x, y, rule, None, None, zero_tol)


def rat(
    x,
    y,
    rule: Optional[SelectionRule] = None,
    r: Optional[float] = None,
    cv: Optional[CvConfig] = None,
    zero_tol: float = ZERO_TOL,
) -> FitResult:
    """
    Ridge adaptive thresholding: LAT with ridge refits in Stages 2 and 3.

    Parameters
    ----------
    x, y, rule, zero_tol:
        As for lat.
    r:
        Fixed positive ridge parameter (standardized space).
    cv:
        Cross-validation settings used when r is None. With neither given,
        r is chosen by 10-fold CV on the default grid.

    Returns
    -------
    result:
        The fit, with the ridge parameter used in ridge_r.
    """
    if r is not None and r <= 0:
        raise ValueError(f"Ridge parameter must be positive, got {r}.")
    if r is not None and cv is not None:
        raise ValueError("Pass either a fixed ridge parameter or a CV config, not both.")
    return _three_stage("rat", x, y, rule, r, cv, zero_tol)
