"""Discrete optimal transport between samples and Halton grids.

Two solver routes: an exact assignment (scaled permutation plan, the
``epsilon = 0`` case) and entropic regularization solved by log-domain
Sinkhorn scaling, which stays finite for epsilon as small as 1e-3. Soft
ranks are the row-normalized barycentric projection of a plan onto the
grid points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import halton
from .exceptions import (
    DegeneratePlanError,
    DimensionError,
    InvalidInputError,
)


@dataclass(frozen=True)
class SinkhornConfig:
    """Stopping rule for the scaling iterations.

    ``tolerance = 0`` disables the marginal check, so exactly ``max_iters``
    iterations run; the training loss uses this to keep the unrolled
    computation graph a fixed size.
    """

    max_iters: int = 10_000
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise InvalidInputError("tolerance must be >= 0")


@dataclass(frozen=True)
class CostMatrix:
    """Squared Euclidean costs between paired source rows and grid rows."""

    values: np.ndarray
    row_points: Optional[np.ndarray] = None
    col_points: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TransportPlan:
    """Coupling with uniform marginals 1/m on rows and columns.

    ``marginal_tolerance`` is the achieved max absolute row/column-sum
    violation; for an exact assignment it is 0 and the plan is a scaled
    permutation.
    """

    weights: np.ndarray
    epsilon: float
    marginal_tolerance: float
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True)
class SoftRankAssignment:
    """Per-sample rank vectors in the convex hull of the grid points."""

    ranks: np.ndarray
    epsilon: float
    source_sizes: Optional[tuple[int, int]] = None


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got ndim={a.ndim}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError(f"{name} must be nonempty, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def cost_matrix(source, target: halton.HaltonGrid | np.ndarray) -> CostMatrix:
    """Squared Euclidean distance between source row i and target row j."""
    src = _as_matrix(source, "source")
    tgt = target.points if isinstance(target, halton.HaltonGrid) else _as_matrix(target, "target")
    if src.shape != tgt.shape:
        raise DimensionError(
            f"source shape {src.shape} does not match target shape {tgt.shape}"
        )
    values = cdist(src, tgt, "sqeuclidean")
    return CostMatrix(values=values, row_points=src, col_points=tgt)


def _cost_values(cost) -> np.ndarray:
    c = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionError(f"cost matrix must be square, got shape {c.shape}")
    return c


def exact_assignment(cost) -> TransportPlan:
    """Cost-minimizing scaled permutation among all m! permutations.

    Solved with the Jonker-Volgenant shortest-augmenting-path algorithm
    (O(m^3)); deterministic for a fixed input.
    """
    c = _cost_values(cost)
    if not np.isfinite(c).all():
        raise InvalidInputError("cost matrix contains non-finite entries")
    m = c.shape[0]
    rows, cols = linear_sum_assignment(c)
    weights = np.zeros((m, m))
    weights[rows, cols] = 1.0 / m
    return TransportPlan(weights=weights, epsilon=0.0, marginal_tolerance=0.0)


def _lse_rows(a: np.ndarray) -> np.ndarray:
    mx = a.max(axis=1)
    return mx + np.log(np.exp(a - mx[:, None]).sum(axis=1))


def _lse_cols(a: np.ndarray) -> np.ndarray:
    mx = a.max(axis=0)
    return mx + np.log(np.exp(a - mx[None, :]).sum(axis=0))


def _sinkhorn_potentials(
    scaled_cost: np.ndarray,
    max_iters: int,
    tolerance: float,
    keep_history: bool = False,
):
    """Alternating log-domain updates for uniform marginals.

    ``scaled_cost`` is C/epsilon. Potentials are returned in the same units,
    so the plan is exp(phi_i + gamma_j - scaled_cost_ij). After every gamma
    update the column sums are exact; convergence is declared when the row
    sums also fall within ``tolerance`` of 1/m.
    """
    m = scaled_cost.shape[0]
    log_w = -np.log(m)
    w = 1.0 / m
    gamma = np.zeros(m)
    phi = np.zeros(m)
    history = [] if keep_history else None
    converged = False
    iterations = 0
    for _ in range(max_iters):
        lse_row = _lse_rows(gamma[None, :] - scaled_cost)
        if iterations > 0 and tolerance > 0:
            row_violation = np.abs(np.exp(phi + lse_row) - w).max()
            if row_violation < tolerance:
                converged = True
                break
        phi = log_w - lse_row
        gamma = log_w - _lse_cols(phi[:, None] - scaled_cost)
        iterations += 1
        if keep_history:
            history.append((phi, gamma))
    return phi, gamma, history, iterations, converged


def _plan_from_potentials(phi, gamma, scaled_cost) -> np.ndarray:
    return np.exp(phi[:, None] + gamma[None, :] - scaled_cost)


def _marginal_violation(weights: np.ndarray) -> float:
    m = weights.shape[0]
    w = 1.0 / m
    row = np.abs(weights.sum(axis=1) - w).max()
    col = np.abs(weights.sum(axis=0) - w).max()
    return float(max(row, col))


def sinkhorn(
    cost,
    epsilon: float,
    max_iters: int = 10_000,
    tolerance: float = 1e-6,
) -> TransportPlan:
    """Entropic plan for uniform marginals via log-domain scaling.

    Returns strictly positive weights. Failure to reach ``tolerance``
    within ``max_iters`` is not an error: the achieved violation is
    recorded in ``marginal_tolerance`` and ``converged`` is False.
    """
    c = _cost_values(cost)
    if not np.isfinite(c).all():
        raise InvalidInputError("cost matrix contains non-finite entries")
    if epsilon <= 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    if tolerance <= 0:
        raise InvalidInputError(f"tolerance must be positive, got {tolerance}")
    if max_iters < 1:
        raise InvalidInputError(f"max_iters must be >= 1, got {max_iters}")
    scaled = c / epsilon
    phi, gamma, _, iterations, converged = _sinkhorn_potentials(
        scaled, max_iters=max_iters, tolerance=tolerance
    )
    weights = _plan_from_potentials(phi, gamma, scaled)
    return TransportPlan(
        weights=weights,
        epsilon=float(epsilon),
        marginal_tolerance=_marginal_violation(weights),
        converged=converged,
        iterations=iterations,
    )


def soft_rank(plan: TransportPlan, target: halton.HaltonGrid | np.ndarray) -> SoftRankAssignment:
    """Row-normalized barycentric projection of a plan onto grid points."""
    pts = target.points if isinstance(target, halton.HaltonGrid) else _as_matrix(target, "target")
    weights = plan.weights
    if weights.shape[1] != pts.shape[0]:
        raise DimensionError(
            f"plan has {weights.shape[1]} columns but target has {pts.shape[0]} rows"
        )
    sums = weights.sum(axis=1)
    if np.any(sums <= 0):
        raise DegeneratePlanError("plan has a row with non-positive sum")
    # Normalize rows before projecting so one-hot rows (exact assignments)
    # reproduce their grid point bit-exactly.
    ranks = (weights / sums[:, None]) @ pts
    return SoftRankAssignment(ranks=ranks, epsilon=plan.epsilon)


def joint_soft_ranks(
    x,
    y,
    epsilon: float,
    cfg: SinkhornConfig | None = None,
) -> tuple[SoftRankAssignment, SoftRankAssignment]:
    """Rank both samples against one pooled Halton grid of size m + n.

    The pooled empirical measure weights each row 1/(m+n), so the sample
    sizes enter the statistic only through the block split returned here.
    ``epsilon = 0`` routes through the exact assignment and yields hard
    ranks (each row mapped to exactly one grid point).
    """
    xm = _as_matrix(x, "x")
    yn = _as_matrix(y, "y")
    if xm.shape[1] != yn.shape[1]:
        raise DimensionError(
            f"x has dimension {xm.shape[1]} but y has dimension {yn.shape[1]}"
        )
    if epsilon < 0:
        raise InvalidInputError(f"epsilon must be >= 0, got {epsilon}")
    cfg = cfg or SinkhornConfig()
    m, n = xm.shape[0], yn.shape[0]
    pooled = np.vstack([xm, yn])
    grid = halton.grid_points(m + n, xm.shape[1])
    cost = cdist(pooled, grid, "sqeuclidean")
    if epsilon == 0:
        plan = exact_assignment(cost)
    else:
        # cfg.tolerance == 0 requests exactly cfg.max_iters iterations (the
        # fixed-length mode the differentiable training loss relies on), so
        # bypass the stricter public wrapper.
        scaled = cost / epsilon
        phi, gamma, _, iterations, converged = _sinkhorn_potentials(
            scaled, max_iters=cfg.max_iters, tolerance=cfg.tolerance
        )
        weights = _plan_from_potentials(phi, gamma, scaled)
        plan = TransportPlan(
            weights=weights,
            epsilon=float(epsilon),
            marginal_tolerance=_marginal_violation(weights),
            converged=converged,
            iterations=iterations,
        )
    ranks = soft_rank(plan, grid).ranks
    rx = SoftRankAssignment(ranks=ranks[:m], epsilon=float(epsilon), source_sizes=(m, n))
    ry = SoftRankAssignment(ranks=ranks[m:], epsilon=float(epsilon), source_sizes=(m, n))
    return rx, ry
