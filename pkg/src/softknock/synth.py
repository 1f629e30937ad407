"""Synthetic feature distributions with known ground truth.

Four families: AR(1) Gaussian, a three-component Gaussian mixture,
multivariate Student's t (unit-variance scaling), and sparse Gaussian
rows. The linear response model draws a random support whose indices are
the ground truth for FDP/power evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, InvalidInputError

Seed = int | Sequence[int]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for one distributional setting.

    Only the fields used by the requested ``kind`` are validated; the rest
    may stay at their defaults.
    """

    kind: str
    d: int
    n: int
    seed: Seed = 0
    rho: float = 0.5
    rhos: tuple[float, ...] = (0.3, 0.5, 0.7)
    weights: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    means: tuple[float, ...] = (0.0, 0.0, 0.0)
    dof: float = 3.0
    sparsity: int = 30

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidInputError(f"need n, d >= 1, got n={self.n}, d={self.d}")


@dataclass(frozen=True)
class ResponseSpec:
    """Gaussian linear response with a random sparse coefficient vector."""

    num_nonzero: int
    amplitude: float
    noise_sd: float = 1.0
    seed: Seed = 0
    random_signs: bool = True

    def __post_init__(self):
        if self.num_nonzero < 0:
            raise InvalidInputError("num_nonzero must be >= 0")
        if self.amplitude < 0:
            raise InvalidInputError("amplitude must be >= 0")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be >= 0")


def ar1_covariance(d: int, rho: float) -> np.ndarray:
    """Covariance with entries rho^|i-j|."""
    if not -1.0 < rho < 1.0:
        raise InvalidInputError(f"rho must lie in (-1, 1), got {rho}")
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _ar1_cholesky(d: int, rho: float) -> np.ndarray:
    cov = ar1_covariance(d, rho)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"AR(1) covariance not PD for rho={rho}") from exc


def gaussian_ar1(spec: SynthSpec) -> np.ndarray:
    """n i.i.d. draws from N(0, Sigma) with Sigma_ij = rho^|i-j|."""
    rng = np.random.default_rng(spec.seed)
    chol = _ar1_cholesky(spec.d, spec.rho)
    z = rng.standard_normal((spec.n, spec.d))
    return z @ chol.T


def gmm3(spec: SynthSpec) -> np.ndarray:
    """Mixture of Gaussians with AR(1) covariances and constant-vector means.

    Component k has mean ``means[k] * ones(d)``, covariance with parameter
    ``rhos[k]``, and weight ``weights[k]``. Labels are drawn first, then one
    block of standard normals is colored per component, so the draw is
    reproducible regardless of component sizes.
    """
    weights = np.asarray(spec.weights, dtype=float)
    means = np.asarray(spec.means, dtype=float)
    rhos = spec.rhos
    if not (len(weights) == len(means) == len(rhos)):
        raise InvalidInputError("weights, means and rhos must have equal length")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidInputError(f"mixture weights sum to {weights.sum()}, not 1")
    if np.any(weights < 0):
        raise InvalidInputError("mixture weights must be nonnegative")
    rng = np.random.default_rng(spec.seed)
    labels = rng.choice(len(weights), size=spec.n, p=weights)
    z = rng.standard_normal((spec.n, spec.d))
    out = np.empty_like(z)
    for k, rho_k in enumerate(rhos):
        members = labels == k
        if not members.any():
            continue
        chol = _ar1_cholesky(spec.d, rho_k)
        out[members] = z[members] @ chol.T + means[k]
    return out


def student_t(spec: SynthSpec, gamma_values: Optional[np.ndarray] = None) -> np.ndarray:
    """Multivariate t draws scaled so each coordinate has unit variance.

    X = sqrt((nu - 2) / nu) * Z / sqrt(G) with Z ~ N(0, Sigma) and
    G ~ Gamma(nu/2, rate nu/2) drawn per row. ``gamma_values`` overrides the
    Gamma draws (testing hook; forcing 1 reduces to a scaled Gaussian).
    """
    nu = spec.dof
    if nu <= 2:
        raise InvalidInputError(f"degrees of freedom must exceed 2, got {nu}")
    rng = np.random.default_rng(spec.seed)
    chol = _ar1_cholesky(spec.d, spec.rho)
    z = rng.standard_normal((spec.n, spec.d)) @ chol.T
    if gamma_values is None:
        gamma_values = rng.gamma(shape=nu / 2.0, scale=2.0 / nu, size=spec.n)
    else:
        gamma_values = np.asarray(gamma_values, dtype=float)
        if gamma_values.shape != (spec.n,):
            raise DimensionError("gamma_values must have one entry per row")
    return np.sqrt((nu - 2.0) / nu) * z / np.sqrt(gamma_values)[:, None]


def sparse_gaussian(spec: SynthSpec) -> np.ndarray:
    """Rows with a shared Gaussian value on a fresh random size-L support.

    Each row draws eta ~ N(0,1) and a uniform subset A of L columns, then
    sets X_j = c * eta on A and 0 elsewhere with c = sqrt(d / L), which
    makes every coordinate unit-variance (inclusion probability L/d).
    """
    L = spec.sparsity
    if L < 1 or L > spec.d:
        raise InvalidInputError(f"sparsity must lie in [1, d], got L={L}, d={spec.d}")
    rng = np.random.default_rng(spec.seed)
    eta = rng.standard_normal(spec.n)
    # Row-wise uniform subsets without replacement via partial argsort.
    keys = rng.random((spec.n, spec.d))
    support = np.argpartition(keys, L - 1, axis=1)[:, :L]
    scale = np.sqrt(spec.d / L)
    out = np.zeros((spec.n, spec.d))
    rows = np.repeat(np.arange(spec.n), L)
    out[rows, support.ravel()] = np.repeat(scale * eta, L)
    return out


def sample(spec: SynthSpec) -> np.ndarray:
    """Dispatch on ``spec.kind``."""
    kinds = {
        "gaussian_ar1": gaussian_ar1,
        "gmm3": gmm3,
        "student_t": student_t,
        "sparse_gaussian": sparse_gaussian,
    }
    if spec.kind not in kinds:
        raise InvalidInputError(
            f"unknown setting {spec.kind!r}; expected one of {sorted(kinds)}"
        )
    return kinds[spec.kind](spec)


def response(x, spec: ResponseSpec):
    """Gaussian linear response y = X beta + z with a random sparse beta.

    The support is drawn uniformly without replacement; nonzero entries are
    ``+/- amplitude / sqrt(m)`` (signs random unless disabled). Returns
    ``(y, true_support, beta)`` with zero-based support indices.
    """
    xm = np.asarray(x, dtype=float)
    if xm.ndim != 2:
        raise DimensionError("x must be a matrix")
    m, d = xm.shape
    if spec.num_nonzero > d:
        raise InvalidInputError(
            f"num_nonzero={spec.num_nonzero} exceeds dimension d={d}"
        )
    rng = np.random.default_rng(spec.seed)
    support = np.sort(rng.choice(d, size=spec.num_nonzero, replace=False))
    if spec.random_signs:
        signs = rng.choice([-1.0, 1.0], size=spec.num_nonzero)
    else:
        signs = np.ones(spec.num_nonzero)
    beta = np.zeros(d)
    beta[support] = signs * spec.amplitude / np.sqrt(m)
    z = spec.noise_sd * rng.standard_normal(m)
    y = xm @ beta + z
    if spec.amplitude == 0:
        # Zero amplitude means no variable truly matters.
        support = support[:0]
    return y, set(int(j) for j in support), beta
