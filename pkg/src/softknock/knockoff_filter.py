"""Variable selection with knockoff statistics and the FDR threshold.

The lasso solves (1/2m)||y - D b||^2 + alpha ||b||_1 on the augmented
design D = [X, X_knock] by cyclic coordinate descent with soft
thresholding. Columns are rescaled internally to unit mean square (no
centering; the objective carries no intercept) and coefficients are
returned in the caller's column scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceWarning, DimensionError, InvalidInputError


@dataclass(frozen=True)
class LassoFit:
    """Coefficients split into original and knockoff halves."""

    beta: np.ndarray
    beta_knock: np.ndarray
    alpha: float
    iterations: int
    max_kkt_violation: float
    converged: bool = True


@dataclass(frozen=True)
class SelectionOutcome:
    """One filtering run: statistics, threshold, selections and scores."""

    w: np.ndarray
    tau: float
    selected: frozenset[int]
    fdp: float
    power: float
    q: float


def soft_threshold(value: float, threshold: float) -> float:
    """sign(value) * max(|value| - threshold, 0)."""
    return math.copysign(max(abs(value) - threshold, 0.0), value)


def lasso(
    design,
    y,
    alpha: float,
    tolerance: float = 1e-9,
    max_iters: int = 10_000,
) -> LassoFit:
    """Cyclic coordinate descent until the largest coefficient change per
    sweep falls below ``tolerance``.

    Exhausting ``max_iters`` attaches a ConvergenceWarning instead of
    failing; the achieved KKT violation is recorded either way.
    """
    D = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float).ravel()
    if D.ndim != 2:
        raise DimensionError("design must be a matrix")
    m, width = D.shape
    if width % 2 != 0:
        raise DimensionError(f"design width must be even (originals + knockoffs), got {width}")
    if yv.shape[0] != m:
        raise DimensionError(f"y has {yv.shape[0]} entries but design has {m} rows")
    if not (np.isfinite(D).all() and np.isfinite(yv).all()):
        raise InvalidInputError("design or response contains non-finite entries")
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    if tolerance <= 0:
        raise InvalidInputError("tolerance must be positive")

    # Rescale columns to x^T x / m = 1; zero columns keep scale 1 and stay 0.
    col_ms = np.sqrt((D * D).mean(axis=0))
    scale = np.where(col_ms > 0, col_ms, 1.0)
    X = D / scale

    gram = X.T @ X / m
    xty = X.T @ yv / m
    coef = np.zeros(width)
    gram_coef = np.zeros(width)

    sweeps = 0
    converged = False
    for sweeps in range(1, max_iters + 1):
        max_delta = 0.0
        for j in range(width):
            old = coef[j]
            # residual correlation with coordinate j removed from the fit
            rho = xty[j] - gram_coef[j] + old
            new = soft_threshold(rho, alpha)
            if new != old:
                gram_coef += gram[:, j] * (new - old)
                coef[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"lasso stopped after {sweeps} sweeps without reaching {tolerance}",
            ConvergenceWarning,
            stacklevel=2,
        )

    grad = xty - gram_coef
    violation = np.where(
        coef == 0.0,
        np.maximum(np.abs(grad) - alpha, 0.0),
        np.abs(grad - alpha * np.sign(coef)),
    )
    coef_caller = coef / scale
    d = width // 2
    return LassoFit(
        beta=coef_caller[:d],
        beta_knock=coef_caller[d:],
        alpha=float(alpha),
        iterations=sweeps,
        max_kkt_violation=float(violation.max()),
        converged=converged,
    )


def knockoff_stats(fit: LassoFit) -> np.ndarray:
    """Absolute coefficient difference W_j = |beta_j| - |beta_knock_j|."""
    return np.abs(fit.beta) - np.abs(fit.beta_knock)


def threshold(w, q: float) -> float:
    """Smallest t with (1 + #{W_j <= -t}) / max(1, #{W_j >= t}) <= q.

    Candidates are the magnitudes of the nonzero statistics; +inf when no
    candidate qualifies (empty selection).
    """
    wv = np.asarray(w, dtype=float).ravel()
    if not np.isfinite(wv).all():
        raise InvalidInputError("knockoff statistics contain non-finite entries")
    if not 0.0 < q < 1.0:
        raise InvalidInputError(f"q must lie in (0, 1), got {q}")
    candidates = np.unique(np.abs(wv[wv != 0.0]))
    for t in candidates:
        negatives = int(np.count_nonzero(wv <= -t))
        positives = int(np.count_nonzero(wv >= t))
        if (1 + negatives) / max(1, positives) <= q:
            return float(t)
    return math.inf


def select(w, q: float) -> tuple[float, frozenset[int]]:
    """Threshold the statistics and return (tau, selected indices)."""
    wv = np.asarray(w, dtype=float).ravel()
    tau = threshold(wv, q)
    if math.isinf(tau):
        return tau, frozenset()
    return tau, frozenset(int(j) for j in np.flatnonzero(wv >= tau))


def evaluate(selected, true_support, d: int) -> tuple[float, float]:
    """FDP and power of a selection against known ground truth.

    Indices are zero-based columns in [0, d). Both ratios guard empty sets
    with a max(1, .) denominator.
    """
    sel = {int(j) for j in selected}
    truth = {int(j) for j in true_support}
    for j in sel | truth:
        if not 0 <= j < d:
            raise InvalidInputError(f"index {j} outside [0, {d})")
    false_hits = len(sel - truth)
    fdp = false_hits / max(1, len(sel))
    power = len(sel & truth) / max(1, len(truth))
    return fdp, power


def run_filter(x, x_knock, y, alpha: float, q: float, true_support=None, **lasso_kwargs) -> SelectionOutcome:
    """Fit the augmented lasso, threshold the statistics, score if possible."""
    xm = np.asarray(x, dtype=float)
    km = np.asarray(x_knock, dtype=float)
    if xm.shape != km.shape or xm.ndim != 2:
        raise DimensionError(
            f"x shape {xm.shape} does not match knockoff shape {km.shape}"
        )
    fit = lasso(np.hstack([xm, km]), y, alpha, **lasso_kwargs)
    w = knockoff_stats(fit)
    tau, selected = select(w, q)
    if true_support is None:
        fdp, power = math.nan, math.nan
    else:
        fdp, power = evaluate(selected, true_support, xm.shape[1])
    return SelectionOutcome(w=w, tau=tau, selected=selected, fdp=fdp, power=power, q=q)
