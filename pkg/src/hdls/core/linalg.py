"""
Dense numeric kernels.

Every solve in this module goes through a checked Cholesky factorization of a
symmetric system that should be positive definite. Design matrices are 2-D
float arrays with observations in rows; responses are 1-D float arrays.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
from joblib import Parallel, delayed

from hdls.core.errors import (
    AllColumnsConstant,
    DimensionMismatch,
    InvalidDimensions,
    SingularSystem,
    SupportTooLarge,
)

logger = logging.getLogger(__name__)

# Sample variance at or below which a column counts as constant.
CONSTANT_VARIANCE_TOL = 1e-14

# A Cholesky pivot L[j, j] with L[j, j]**2 <= PIVOT_TOL * A[j, j] marks A as singular.
PIVOT_TOL = 1e-12

IndexLike = Union[Sequence[int], np.ndarray]


def as_design(x) -> np.ndarray:
    """
    Validates a design matrix.

    Parameters
    ----------
    x:
        Array-like of shape (n, p).

    Returns
    -------
    x:
        float64 array with n >= 2, p >= 1 and only finite entries.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidDimensions(f"Design matrix must be 2-D, got shape {x.shape}.")
    n, p = x.shape
    if n < 2 or p < 1:
        raise InvalidDimensions(f"Design matrix needs n >= 2 and p >= 1, got {x.shape}.")
    if not np.all(np.isfinite(x)):
        raise InvalidDimensions("Design matrix contains non-finite entries.")
    return x


def as_response(y, n: int) -> np.ndarray:
    """Validates a response vector of length n."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != n:
        raise DimensionMismatch(
            f"Response must be a vector of length {n}, got shape {y.shape}."
        )
    if not np.all(np.isfinite(y)):
        raise DimensionMismatch("Response contains non-finite entries.")
    return y


def as_support(support: Optional[IndexLike], p: int) -> np.ndarray:
    """Sorted, de-duplicated integer index array within [0, p)."""
    if support is None:
        return np.arange(p)
    idx = np.unique(np.asarray(support, dtype=np.int64).ravel())
    if idx.size and (idx[0] < 0 or idx[-1] >= p):
        raise InvalidDimensions(f"Support indices must lie in [0, {p}).")
    return idx


@dataclass
class Coefficients:
    """
    Linear model coefficients.

    Parameters
    ----------
    beta:
        Coefficient vector in the original column indexing. Columns outside
        the active support are exactly zero.
    intercept:
        Intercept in original units (0 for fits in standardized space).
    """

    beta: np.ndarray
    intercept: float = 0.0

    @property
    def support(self) -> np.ndarray:
        """Indices of the nonzero coefficients."""
        return np.flatnonzero(self.beta)

    def predict(self, x) -> np.ndarray:
        """Linear predictor x @ beta + intercept for rows of x."""
        return np.asarray(x, dtype=np.float64) @ self.beta + self.intercept


@dataclass
class StandardizedData:
    """
    Centered and unit-variance data with the statistics needed to map
    standardized coefficients back to original units.

    x_tilde holds only the retained (non-constant) columns, in the order of
    kept_cols. col_means and col_scales are indexed by original column and
    col_scales is 0 for dropped columns.
    """

    x_tilde: np.ndarray
    y_tilde: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float
    y_scale: float
    dropped_constant_cols: np.ndarray
    kept_cols: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kept_cols is None:
            self.kept_cols = np.setdiff1d(
                np.arange(self.col_means.shape[0]), self.dropped_constant_cols
            )

    @property
    def n(self) -> int:
        """Number of observations."""
        return self.x_tilde.shape[0]

    @property
    def p(self) -> int:
        """Number of original columns, constant ones included."""
        return self.col_means.shape[0]

    def expand(self, beta_kept: np.ndarray) -> np.ndarray:
        """Scatters a vector over retained columns into original indexing."""
        full = np.zeros(self.p)
        full[self.kept_cols] = beta_kept
        return full

    def to_original(self, beta_tilde: np.ndarray) -> Coefficients:
        """
        De-standardizes coefficients.

        Parameters
        ----------
        beta_tilde:
            Standardized-space coefficients, either over the retained columns
            (length len(kept_cols)) or in original indexing (length p).

        Returns
        -------
        coefficients:
            beta_j = beta_tilde_j * y_scale / col_scales_j on retained columns,
            intercept = y_mean - sum_j beta_j * col_means_j.
        """
        beta_tilde = np.asarray(beta_tilde, dtype=np.float64)
        if beta_tilde.shape[0] == self.kept_cols.shape[0]:
            beta_tilde = self.expand(beta_tilde)
        beta = np.zeros(self.p)
        kept = self.kept_cols
        beta[kept] = beta_tilde[kept] * self.y_scale / self.col_scales[kept]
        intercept = self.y_mean - float(beta[kept] @ self.col_means[kept])
        return Coefficients(beta, intercept)


def standardize(x, y) -> StandardizedData:
    """
    Centers and scales every non-constant column of x, and y, to sample mean 0
    and sample variance 1 (denominator n - 1).

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector (n,).

    Returns
    -------
    sd:
        The standardized data. Columns with sample variance below
        CONSTANT_VARIANCE_TOL are listed in dropped_constant_cols and left out
        of x_tilde. A constant response keeps scale 1.
    """
    x = as_design(x)
    y = as_response(y, x.shape[0])

    col_means = x.mean(axis=0)
    col_vars = x.var(axis=0, ddof=1)
    constant = col_vars < CONSTANT_VARIANCE_TOL
    dropped = np.flatnonzero(constant)
    kept = np.flatnonzero(~constant)
    if kept.size == 0:
        raise AllColumnsConstant(
            f"All {x.shape[1]} columns are constant; nothing left to fit."
        )
    if dropped.size:
        logger.info("Dropping %d constant column(s): %s", dropped.size, dropped.tolist())

    col_scales = np.zeros(x.shape[1])
    col_scales[kept] = np.sqrt(col_vars[kept])
    x_tilde = (x[:, kept] - col_means[kept]) / col_scales[kept]

    y_mean = float(y.mean())
    y_var = float(y.var(ddof=1))
    y_scale = float(np.sqrt(y_var)) if y_var >= CONSTANT_VARIANCE_TOL else 1.0
    y_tilde = (y - y_mean) / y_scale

    return StandardizedData(
        x_tilde=x_tilde,
        y_tilde=y_tilde,
        col_means=col_means,
        col_scales=col_scales,
        y_mean=y_mean,
        y_scale=y_scale,
        dropped_constant_cols=dropped,
        kept_cols=kept,
    )


def checked_cholesky(a: np.ndarray, what: str = "system") -> np.ndarray:
    """
    Lower Cholesky factor of a symmetric matrix that should be positive
    definite.

    Parameters
    ----------
    a:
        Square symmetric matrix.
    what:
        Name of the system, used in the error message.

    Returns
    -------
    lower:
        Lower-triangular factor L with L @ L.T == a.

    Raises
    ------
    SingularSystem
        If LAPACK rejects the matrix or a pivot is negligible relative to its
        own diagonal entry. The test does not depend on column scaling.
    """
    try:
        lower = sla.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"Cholesky factorization of the {what} failed: {e}") from e
    pivots = np.diag(lower)
    if not pivots.size:
        return lower
    smallest = float(pivots.min())
    if not np.all(np.isfinite(pivots)) or np.any(pivots**2 <= PIVOT_TOL * np.abs(np.diag(a))):
        raise SingularSystem(
            f"The {what} of order {a.shape[0]} is numerically singular",
            smallest_pivot=smallest,
        )
    return lower


def _solve_spd(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    lower = checked_cholesky(a, what)
    return sla.cho_solve((lower, True), b, check_finite=False)


def ridge_dual_solve(x, y, r: float) -> Coefficients:
    """
    Ridge solution through the n x n dual system, X^T (X X^T + r I_n)^{-1} y.

    Never forms a p x p matrix; the cost is O(n^2 p + n^3).

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector (n,).
    r:
        Nonnegative ridge parameter. r = 0 requires X X^T to be nonsingular.

    Returns
    -------
    coefficients:
        Length-p coefficients with zero intercept.
    """
    x = as_design(x)
    y = as_response(y, x.shape[0])
    if r < 0:
        raise ValueError(f"Ridge parameter must be nonnegative, got {r}.")
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += r
    alpha = _solve_spd(gram, y, "dual system X X^T + r I")
    return Coefficients(x.T @ alpha)


def ridge_primal_solve(x, y, r: float) -> Coefficients:
    """
    Ridge solution through the p x p primal system, (X^T X + r I_p)^{-1} X^T y.

    Only sensible for small p; it is the reference the dual solve is checked
    against.
    """
    x = as_design(x)
    y = as_response(y, x.shape[0])
    if r < 0:
        raise ValueError(f"Ridge parameter must be nonnegative, got {r}.")
    gram = x.T @ x
    gram[np.diag_indices_from(gram)] += r
    return Coefficients(_solve_spd(gram, x.T @ y, "primal system X^T X + r I"))


def hd_ols(sd: StandardizedData, ridge_eps: float = 0.1) -> Coefficients:
    """
    High-dimensional OLS estimator on standardized data,
    X~^T (X~ X~^T + ridge_eps I_n)^{-1} y~.

    The small ridge term is needed because X~ X~^T has rank at most n - 1
    after centering.

    Parameters
    ----------
    sd:
        Standardized data.
    ridge_eps:
        Nonnegative ridge term.

    Returns
    -------
    coefficients:
        Standardized-space coefficients in original column indexing (zeros on
        dropped constant columns), zero intercept.
    """
    fit = ridge_dual_solve(sd.x_tilde, sd.y_tilde, ridge_eps)
    return Coefficients(sd.expand(fit.beta))


def _restricted_fit(
    x: np.ndarray, y: np.ndarray, support: np.ndarray, r: float, what: str
) -> Tuple[Coefficients, float, np.ndarray]:
    n, p = x.shape
    k = support.size
    if k >= n:
        raise SupportTooLarge(f"Support of size {k} needs fewer columns than n = {n}.")

    beta = np.zeros(p)
    if k == 0:
        return Coefficients(beta), float(y @ y) / n, np.zeros(0)

    xs = x[:, support]
    gram = xs.T @ xs
    if r:
        gram[np.diag_indices_from(gram)] += r
    lower = checked_cholesky(gram, what)
    beta_s = sla.cho_solve((lower, True), xs.T @ y, check_finite=False)
    cbar = sla.cho_solve((lower, True), np.eye(k), check_finite=False)

    resid = y - xs @ beta_s
    sigma2_hat = float(resid @ resid) / (n - k)
    beta[support] = beta_s
    return Coefficients(beta), sigma2_hat, np.diag(cbar).copy()


def ols_refit(x, y, support: IndexLike) -> Tuple[Coefficients, float, np.ndarray]:
    """
    Least squares restricted to the support columns.

    Parameters
    ----------
    x:
        Design matrix (n, p).
    y:
        Response vector (n,).
    support:
        Column indices to fit, |support| < n.

    Returns
    -------
    coefficients:
        Length-p coefficients, zero off the support.
    sigma2_hat:
        RSS / (n - |support|); ||y||^2 / n for the empty support.
    cbar_diag:
        Diagonal of the inverse restricted Gram matrix, in sorted support order.
    """
    x = as_design(x)
    y = as_response(y, x.shape[0])
    support = as_support(support, x.shape[1])
    return _restricted_fit(x, y, support, 0.0, "restricted Gram matrix")


def ridge_refit(
    x, y, support: IndexLike, r: float
) -> Tuple[Coefficients, float, np.ndarray]:
    """
    Ridge regression restricted to the support columns,
    (X_S^T X_S + r I)^{-1} X_S^T y.

    Returns the same triple as ols_refit; cbar_diag is the diagonal of
    (X_S^T X_S + r I)^{-1}.
    """
    if r <= 0:
        raise ValueError(f"Ridge parameter must be positive, got {r}.")
    x = as_design(x)
    y = as_response(y, x.shape[0])
    support = as_support(support, x.shape[1])
    if support.size == 0:
        raise InvalidDimensions("Ridge refit needs a nonempty support.")
    return _restricted_fit(x, y, support, r, "regularized restricted Gram matrix")


class ProjectionDiagnostics(NamedTuple):
    """Summary of Phi = X^T (X X^T + ridge_eps I)^{-1} X; phi is only kept on request."""

    diag: np.ndarray
    max_offdiag: float
    trace: float
    phi: Optional[np.ndarray] = None


def _projection_block(
    x: np.ndarray, lower: np.ndarray, cols: np.ndarray, keep_phi: bool
) -> Tuple[np.ndarray, float, Optional[np.ndarray]]:
    w = sla.cho_solve((lower, True), x[:, cols], check_finite=False)
    block = x.T @ w
    diag = block[cols, np.arange(cols.size)].copy()
    block_abs = np.abs(block)
    block_abs[cols, np.arange(cols.size)] = 0.0
    return diag, float(block_abs.max()) if block_abs.size else 0.0, (block if keep_phi else None)


def projection_diagnostics(
    x,
    ridge_eps: float = 0.0,
    block_size: int = 256,
    materialize: bool = False,
    n_jobs: int = 1,
) -> ProjectionDiagnostics:
    """
    Diagonal, largest absolute off-diagonal entry and trace of
    Phi = X^T (X X^T + ridge_eps I_n)^{-1} X.

    Phi is processed in column blocks of width block_size, so memory stays at
    O(p * block_size) unless materialize is set.

    Parameters
    ----------
    x:
        Design matrix (n, p).
    ridge_eps:
        Nonnegative ridge term.
    block_size:
        Column block width.
    materialize:
        Also return the full p x p matrix Phi.
    n_jobs:
        Number of joblib workers over column blocks. Results do not depend on it.

    Returns
    -------
    diagnostics:
        (diag, max_offdiag, trace, phi); phi is None unless materialized.
    """
    x = as_design(x)
    if ridge_eps < 0:
        raise ValueError(f"ridge_eps must be nonnegative, got {ridge_eps}.")
    if block_size < 1:
        raise ValueError(f"block_size must be positive, got {block_size}.")
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += ridge_eps
    lower = checked_cholesky(gram, "dual system X X^T + r I")

    p = x.shape[1]
    blocks = [np.arange(s, min(s + block_size, p)) for s in range(0, p, block_size)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_projection_block)(x, lower, cols, materialize) for cols in blocks
    )

    diag = np.concatenate([res[0] for res in results])
    max_offdiag = max(res[1] for res in results)
    phi = np.hstack([res[2] for res in results]) if materialize else None
    return ProjectionDiagnostics(diag, max_offdiag, float(diag.sum()), phi)
