"""
Seeded generators for the synthetic regression designs: independent,
compound-symmetric, AR(1), near-duplicate group and factor-model predictors,
plus the elliptical design x = sqrt(p) L z Sigma^{1/2} / ||z||.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.signal import lfilter

from hdls.core.errors import InvalidDimensions, ZeroSignal
from hdls.core.linalg import Coefficients
from hdls.core.rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_SNR = 2.3


@dataclass(frozen=True)
class Identity:
    """Independent standard normal predictors."""

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        """
        Draws a design with this covariance.

        Parameters
        ----------
        rng:
            Source of randomness.
        n, p:
            Shape of the design.

        Returns
        -------
        x:
            Array of shape (n, p) whose rows are N(0, Sigma).
        """
        return rng.standard_normal((n, p))

    def apply_root(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Maps rows z ~ N(0, I) to rows with covariance Sigma (z Sigma^{1/2})."""
        return z

    def covariance(self, p: int) -> np.ndarray:
        """The p x p covariance matrix Sigma."""
        return np.eye(p)


@dataclass(frozen=True)
class CompoundSymmetry:
    """All pairs of predictors share correlation rho."""

    rho: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"Compound symmetry needs rho in [0, 1), got {self.rho}.")

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        # One shared component per row: O(np) instead of a p x p factorization.
        z = rng.standard_normal((n, p))
        w = rng.standard_normal((n, 1))
        return z * math.sqrt(1.0 - self.rho) + w * math.sqrt(self.rho)

    def apply_root(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        p = z.shape[1]
        a = math.sqrt(1.0 - self.rho)
        c = (math.sqrt(1.0 - self.rho + self.rho * p) - a) / p
        return a * z + c * z.sum(axis=1, keepdims=True)

    def covariance(self, p: int) -> np.ndarray:
        return (1.0 - self.rho) * np.eye(p) + self.rho * np.ones((p, p))


@dataclass(frozen=True)
class AR1:
    """Autoregressive correlation rho^|i - j|."""

    rho: float = 0.9

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"AR(1) needs rho in (-1, 1), got {self.rho}.")

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        return self.apply_root(rng.standard_normal((n, p)), rng)

    def apply_root(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # x_0 = z_0, x_j = rho x_{j-1} + s z_j
        s = math.sqrt(1.0 - self.rho**2)
        z = z.copy()
        z[:, 0] /= s
        return lfilter([s], [1.0, -self.rho], z, axis=1)

    def covariance(self, p: int) -> np.ndarray:
        idx = np.arange(p)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class GroupStructure:
    """
    Near-duplicate groups: column g + groups * m (m < per_group) equals the
    latent z_g plus N(0, jitter_sd^2); every other column is independent N(0, 1).
    """

    groups: int = 3
    per_group: int = 5
    jitter_sd: float = 0.1

    def __post_init__(self):
        if self.groups < 1 or self.per_group < 1 or self.jitter_sd < 0:
            raise ValueError("Group structure needs groups, per_group >= 1 and jitter_sd >= 0.")

    @property
    def width(self) -> int:
        """Number of grouped columns."""
        return self.groups * self.per_group

    def group_columns(self, g: int) -> np.ndarray:
        """Column indices of group g."""
        return g + self.groups * np.arange(self.per_group)

    def _check(self, p: int):
        if p < self.width:
            raise InvalidDimensions(f"Group structure needs p >= {self.width}, got {p}.")

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        self._check(p)
        x = rng.standard_normal((n, p))
        latent = rng.standard_normal((n, self.groups))
        for g in range(self.groups):
            cols = self.group_columns(g)
            x[:, cols] = latent[:, [g]] + self.jitter_sd * rng.standard_normal((n, cols.size))
        return x

    def apply_root(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        self._check(z.shape[1])
        s, m = self.jitter_sd, self.per_group
        c = (math.sqrt(s**2 + m) - s) / m
        x = z.copy()
        for g in range(self.groups):
            cols = self.group_columns(g)
            block = z[:, cols]
            x[:, cols] = s * block + c * block.sum(axis=1, keepdims=True)
        return x

    def covariance(self, p: int) -> np.ndarray:
        self._check(p)
        cov = np.eye(p)
        for g in range(self.groups):
            cols = self.group_columns(g)
            cov[np.ix_(cols, cols)] = 1.0
            cov[cols, cols] = 1.0 + self.jitter_sd**2
        return cov


@dataclass(frozen=True)
class FactorModel:
    """x_i = sum_j phi_j f_ij + eta_i with k standard normal factors and loadings."""

    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"Factor model needs k >= 1, got {self.k}.")

    def sample(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        """Factors, loadings and idiosyncratic noise are all drawn from rng."""
        loadings = rng.standard_normal((p, self.k))
        factors = rng.standard_normal((n, self.k))
        return factors @ loadings.T + rng.standard_normal((n, p))

    def apply_root(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # Sigma = I + F F^T, so Sigma^{1/2} = I + U (sqrt(1 + S^2) - 1) U^T.
        loadings = rng.standard_normal((z.shape[1], self.k))
        u, s, _ = np.linalg.svd(loadings, full_matrices=False)
        return z + ((z @ u) * (np.sqrt(1.0 + s**2) - 1.0)) @ u.T


CovarianceSpec = Union[Identity, CompoundSymmetry, AR1, GroupStructure, FactorModel]

EXAMPLES = {
    "i": Identity(),
    "ii": CompoundSymmetry(rho=0.6),
    "iii": GroupStructure(),
    "iv": FactorModel(k=5),
}

_MIN_P = {"i": 5, "ii": 5, "iii": 15, "iv": 5}


@dataclass(frozen=True)
class ConstantL:
    """L_i = value for every row."""

    value: float = 1.0

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        """n radial factors L_i for rows of dimension p."""
        return np.full(n, self.value)


@dataclass(frozen=True)
class UniformL:
    """L ~ Uniform(a, b)."""

    a: float = 0.5
    b: float = 1.5

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, n)


@dataclass(frozen=True)
class ChiSquareL:
    """L^2 ~ chi2(df) / df; df = p makes the rows exactly Gaussian N(0, Sigma)."""

    df: Optional[float] = None

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        df = self.df if self.df is not None else p
        return np.sqrt(rng.chisquare(df, n) / df)


@dataclass(frozen=True)
class InvGammaL:
    """L^2 ~ InvGamma(shape, scale); heavy-tailed rows. scale defaults to shape - 1 (E[L^2] = 1)."""

    shape: float = 3.0
    scale: Optional[float] = None

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        scale = self.scale if self.scale is not None else self.shape - 1.0
        return np.sqrt(scale / rng.gamma(self.shape, 1.0, n))


RadialLaw = Union[ConstantL, UniformL, ChiSquareL, InvGammaL]


def _check_radial(l_dist: RadialLaw):
    bad = (
        (isinstance(l_dist, ConstantL) and l_dist.value <= 0)
        or (isinstance(l_dist, UniformL) and not 0 < l_dist.a < l_dist.b)
        or (isinstance(l_dist, ChiSquareL) and l_dist.df is not None and l_dist.df <= 0)
        or (
            isinstance(l_dist, InvGammaL)
            and (l_dist.shape <= 0 or (l_dist.scale or l_dist.shape - 1.0) <= 0)
        )
    )
    if bad:
        raise ValueError(f"Radial law must produce positive values: {l_dist}.")


def sample_elliptical(
    n: int,
    p: int,
    sigma_spec: CovarianceSpec = Identity(),
    l_dist: RadialLaw = ConstantL(),
    seed: int = 0,
) -> np.ndarray:
    """
    Rows x_i = sqrt(p) L_i z_i Sigma^{1/2} / ||z_i|| with z_i ~ N(0, I_p) and
    L_i drawn from l_dist independently of z_i.

    Parameters
    ----------
    n, p:
        Shape of the design.
    sigma_spec:
        Covariance structure Sigma.
    l_dist:
        Radial law of L.
    seed:
        Base seed.

    Returns
    -------
    x:
        Design matrix (n, p).
    """
    if n < 1 or p < 1:
        raise InvalidDimensions(f"Need n, p >= 1, got ({n}, {p}).")
    _check_radial(l_dist)
    rng = make_rng(seed)
    z = rng.standard_normal((n, p))
    radial = l_dist.draw(rng, n, p)
    norms = np.linalg.norm(z, axis=1)
    return (math.sqrt(p) * radial / norms)[:, None] * sigma_spec.apply_root(z, rng)


def snr_calibrate(beta: Union[Coefficients, np.ndarray], snr: float) -> float:
    """Noise level sigma = ||beta||_2 / snr."""
    if isinstance(beta, Coefficients):
        beta = beta.beta
    norm = float(np.linalg.norm(beta))
    if norm == 0.0:
        raise ZeroSignal("Cannot calibrate noise against an all-zero coefficient vector.")
    if snr <= 0:
        raise ValueError(f"SNR must be positive, got {snr}.")
    return norm / snr


@dataclass
class SyntheticInstance:
    """
    One generated regression problem y = x beta_true + eps.

    Parameters
    ----------
    which:
        Example name ("i" to "iv").
    x, y:
        Design and response.
    beta_true:
        True coefficients (zero intercept).
    sigma:
        Noise standard deviation.
    snr:
        Requested ||beta||_2 / sigma.
    spec:
        Covariance structure the design was drawn from.
    seed:
        Seed that produced the instance.
    """

    which: str
    x: np.ndarray
    y: np.ndarray
    beta_true: Coefficients
    sigma: float
    snr: float
    spec: CovarianceSpec
    seed: int
    noise: str = field(default="gaussian")

    @property
    def true_support(self) -> np.ndarray:
        """Indices of the nonzero true coefficients."""
        return self.beta_true.support

    def checksum(self) -> str:
        """SHA-256 of the design and response bytes."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.x).tobytes())
        digest.update(np.ascontiguousarray(self.y).tobytes())
        return digest.hexdigest()


def example_beta(which: str, p: int, rng: np.random.Generator) -> np.ndarray:
    """True coefficients of a named example."""
    beta = np.zeros(p)
    if which == "i":
        signs = (-1.0) ** rng.integers(0, 2, 5)
        beta[:5] = signs * (np.abs(rng.standard_normal(5)) + 1.0)
    elif which in ("ii", "iv"):
        beta[:5] = 3.0
    elif which == "iii":
        beta[:15] = 3.0
    return beta


def gen_example(
    which: str,
    n: int,
    p: int,
    snr: float = DEFAULT_SNR,
    seed: int = 0,
    sigma: Optional[float] = None,
    noise: str = "gaussian",
    noise_df: float = 5.0,
) -> SyntheticInstance:
    """
    Draws one instance of a named synthetic example.

    Parameters
    ----------
    which:
        "i" independent, "ii" compound symmetry (rho = 0.6), "iii" group
        structure, "iv" factor model (k = 5).
    n, p:
        Shape of the design.
    snr:
        ||beta||_2 / sigma used to calibrate the noise.
    seed:
        Base seed; identical arguments give a bit-identical instance.
    sigma:
        Overrides the calibrated noise level (0 gives a noiseless response).
    noise:
        "gaussian" or "student_t" (variance matched to sigma^2).
    noise_df:
        Degrees of freedom of the Student-t noise, > 2.

    Returns
    -------
    instance:
        The generated problem.
    """
    if which not in EXAMPLES:
        raise InvalidDimensions(f"Unknown example {which!r}; expected one of {sorted(EXAMPLES)}.")
    if n < 2 or p < _MIN_P[which]:
        raise InvalidDimensions(
            f"Example {which} needs n >= 2 and p >= {_MIN_P[which]}, got ({n}, {p})."
        )
    if noise not in ("gaussian", "student_t"):
        raise ValueError(f"Unknown noise law {noise!r}.")

    rng = make_rng(seed)
    beta = example_beta(which, p, rng)
    spec = EXAMPLES[which]
    x = spec.sample(rng, n, p)

    if sigma is None:
        sigma = snr_calibrate(beta, snr)
    elif sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}.")

    if noise == "gaussian":
        eps = sigma * rng.standard_normal(n)
    else:
        if noise_df <= 2:
            raise ValueError("Student-t noise needs noise_df > 2 for a finite variance.")
        eps = sigma * math.sqrt((noise_df - 2.0) / noise_df) * rng.standard_t(noise_df, n)

    y = x @ beta + eps
    logger.debug("Generated example %s (n=%d, p=%d, sigma=%.4f, seed=%d)", which, n, p, sigma, seed)
    return SyntheticInstance(
        which=which,
        x=x,
        y=y,
        beta_true=Coefficients(beta),
        sigma=float(sigma),
        snr=snr,
        spec=spec,
        seed=seed,
        noise=noise,
    )
