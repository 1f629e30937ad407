"""Decorrelation target s* and the penalty that keeps knockoffs apart.

The target solves min sum |1 - s_j| over s in [0, 1]^d subject to
2*Sigma - diag(s) >= 0. Rather than a general interior-point SDP, the
solver starts from the best uniform level (exact for equicorrelated
matrices by symmetry) and then runs a few sweeps of per-coordinate
maximization with bisection, which is deterministic and keeps the iterate
feasible throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, InvalidInputError, SingularCovarianceError


@dataclass(frozen=True)
class SdpSolution:
    """Feasible decorrelation vector with its certificate numbers."""

    s: np.ndarray
    feasibility_gap: float
    objective: float


def _min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


def correlation_with_ridge(data: np.ndarray, ridge: float = 1e-4) -> np.ndarray:
    """Empirical correlation matrix, ridged when nearly singular.

    Adds ``ridge * I`` whenever the smallest eigenvalue falls below 1e-6 so
    the downstream program has a strictly feasible starting point.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DimensionError("data must be a matrix with at least 2 rows")
    corr = np.corrcoef(x, rowvar=False)
    corr = np.atleast_2d(corr)
    if _min_eig(corr) < 1e-6:
        corr = corr + ridge * np.eye(corr.shape[0])
    return corr


def solve_sdp(sigma, tolerance: float = 1e-6, sweeps: int = 3) -> SdpSolution:
    """Deterministic approximate solution of the decorrelation program.

    Starts from the largest feasible uniform level min(2*lambda_min, 1),
    then raises each coordinate toward 1 as far as feasibility allows
    (bisection per coordinate, ``sweeps`` full passes). The objective
    sum |1 - s_j| is nonincreasing across iterations.
    """
    sig = np.asarray(sigma, dtype=float)
    if sig.ndim != 2 or sig.shape[0] != sig.shape[1]:
        raise DimensionError(f"sigma must be square, got shape {sig.shape}")
    if not np.isfinite(sig).all():
        raise InvalidInputError("sigma contains non-finite entries")
    if not np.allclose(sig, sig.T, atol=1e-10):
        raise InvalidInputError("sigma must be symmetric")
    if tolerance <= 0:
        raise InvalidInputError("tolerance must be positive")
    d = sig.shape[0]
    lam_min = _min_eig(sig)
    if lam_min <= 0:
        raise SingularCovarianceError(
            f"sigma is not positive definite (min eigenvalue {lam_min:.3e})"
        )
    two_sigma = 2.0 * sig

    def feasible(s_vec):
        return _min_eig(two_sigma - np.diag(s_vec)) >= 0.0

    # Largest feasible uniform level: min-eig(2*Sigma - u*I) = 2*lam_min - u.
    s = np.full(d, min(2.0 * lam_min, 1.0))
    for _ in range(sweeps):
        for j in range(d):
            lo = s[j]
            hi = 1.0
            if lo >= hi:
                continue
            trial = s.copy()
            trial[j] = hi
            if feasible(trial):
                s[j] = hi
                continue
            while hi - lo > tolerance:
                mid = 0.5 * (lo + hi)
                trial[j] = mid
                if feasible(trial):
                    lo = mid
                else:
                    hi = mid
            s[j] = lo
    gap = _min_eig(two_sigma - np.diag(s))
    objective = float(np.abs(1.0 - s).sum())
    return SdpSolution(s=s, feasibility_gap=gap, objective=objective)


def d_corr(x, x_knock, s_star: SdpSolution | np.ndarray) -> float:
    """Squared distance between per-column correlations and 1 - s*.

    Correlations are the empirical per-column correlation between X_j and
    its knockoff (columns centered, 1/n normalization).
    """
    xm = np.asarray(x, dtype=float)
    km = np.asarray(x_knock, dtype=float)
    if xm.shape != km.shape or xm.ndim != 2:
        raise DimensionError(
            f"x shape {xm.shape} does not match x_knock shape {km.shape}"
        )
    s = s_star.s if isinstance(s_star, SdpSolution) else np.asarray(s_star, dtype=float)
    if s.shape != (xm.shape[1],):
        raise DimensionError(
            f"s_star has shape {s.shape} but data has {xm.shape[1]} columns"
        )
    xc = xm - xm.mean(axis=0)
    kc = km - km.mean(axis=0)
    sx = np.sqrt((xc * xc).mean(axis=0))
    sk = np.sqrt((kc * kc).mean(axis=0))
    denom = sx * sk
    if np.any(denom <= 0):
        raise InvalidInputError("a column has zero variance; correlation undefined")
    corr = (xc * kc).mean(axis=0) / denom
    resid = corr - (1.0 - s)
    return float((resid * resid).sum())
