"""Hand-written reverse-mode gradients for the training loss.

The loss pipeline is knockoffs -> swap blocks -> pooled cost matrix ->
a fixed number of Sinkhorn iterations -> barycentric soft ranks -> kernel
MMD, plus the moment and decorrelation penalties. Each stage here has a
forward that stores what its backward needs; the Sinkhorn stage keeps the
potential vectors of every iteration and replays the softmax weights on
the way back, so memory stays at O(L * N) while the plan itself is O(N^2).

Gradients are with respect to the knockoff matrix (and through the MLP,
its parameters); the data matrix, noise and grid are constants.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from . import halton
from .exceptions import NumericError
from .ot import _sinkhorn_potentials
from .stats import KernelSpec, mixture_kernel


def _check_finite(arr, stage: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced at stage: {stage}")


def _kernel_grad_weights(sq_dists: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """d k / d(x) = -(x - y) * w with w the mixture of exp(.)/sigma^2 terms."""
    out = np.zeros_like(sq_dists)
    for sigma in kernel.bandwidths:
        s2 = sigma * sigma
        out += np.exp(-sq_dists / (2.0 * s2)) / s2
    out /= len(kernel.bandwidths)
    return out


def mmd_unbiased_vjp(a: np.ndarray, b: np.ndarray, kernel: KernelSpec, want_grad: bool):
    """Unbiased MMD^2 and its gradients with respect to both samples."""
    m, n = a.shape[0], b.shape[0]
    daa = cdist(a, a, "sqeuclidean")
    dbb = cdist(b, b, "sqeuclidean")
    dab = cdist(a, b, "sqeuclidean")
    kaa = mixture_kernel(daa, kernel)
    kbb = mixture_kernel(dbb, kernel)
    kab = mixture_kernel(dab, kernel)
    value = float(
        (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
        - 2.0 * kab.sum() / (m * n)
        + (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    )
    if not want_grad:
        return value, None, None
    waa = _kernel_grad_weights(daa, kernel)
    np.fill_diagonal(waa, 0.0)
    wbb = _kernel_grad_weights(dbb, kernel)
    np.fill_diagonal(wbb, 0.0)
    wab = _kernel_grad_weights(dab, kernel)
    c_a = 2.0 / (m * (m - 1))
    c_b = 2.0 / (n * (n - 1))
    c_x = 2.0 / (m * n)
    da = c_a * (waa @ a - waa.sum(axis=1)[:, None] * a) + c_x * (
        wab.sum(axis=1)[:, None] * a - wab @ b
    )
    db = c_b * (wbb @ b - wbb.sum(axis=1)[:, None] * b) + c_x * (
        wab.sum(axis=0)[:, None] * b - wab.T @ a
    )
    return value, da, db


def _sinkhorn_backward(
    history: list,
    scaled_cost: np.ndarray,
    dphi: np.ndarray,
    dgamma: np.ndarray,
    dk: np.ndarray,
):
    """Backpropagate through the recorded scaling iterations, in place on dk."""
    n = scaled_cost.shape[0]
    for t in range(len(history) - 1, -1, -1):
        phi_t, gamma_t = history[t]
        gamma_prev = history[t - 1][1] if t > 0 else np.zeros(n)
        # gamma_t = log_w - LSE_i(phi_t - K): column softmax over i.
        s_mat = n * np.exp(phi_t[:, None] + gamma_t[None, :] - scaled_cost)
        dk += s_mat * dgamma[None, :]
        dphi = dphi - s_mat @ dgamma
        # phi_t = log_w - LSE_j(gamma_prev - K): row softmax over j.
        t_mat = n * np.exp(phi_t[:, None] + gamma_prev[None, :] - scaled_cost)
        dk += t_mat * dphi[:, None]
        dgamma = -(t_mat.T @ dphi)
        dphi = np.zeros(n)
    return dk


def srmmd_fixed(
    a_block: np.ndarray,
    b_block: np.ndarray,
    epsilon: float,
    kernel: KernelSpec,
    n_iters: int,
    want_grad: bool = True,
):
    """Soft-rank MMD with exactly ``n_iters`` Sinkhorn iterations.

    Returns (value, grad_a_block, grad_b_block); the gradients are None
    when ``want_grad`` is False.
    """
    na = a_block.shape[0]
    pooled = np.vstack([a_block, b_block])
    n, d = pooled.shape
    grid = halton.grid_points(n, d)
    cost = cdist(pooled, grid, "sqeuclidean")
    scaled = cost / epsilon
    phi, gamma, history, _, _ = _sinkhorn_potentials(
        scaled, max_iters=n_iters, tolerance=0.0, keep_history=want_grad
    )
    _check_finite(phi, "sinkhorn potentials")
    plan = np.exp(phi[:, None] + gamma[None, :] - scaled)
    row_sums = plan.sum(axis=1)
    ranks = (plan / row_sums[:, None]) @ grid
    _check_finite(ranks, "soft ranks")
    value, dra, drb = mmd_unbiased_vjp(ranks[:na], ranks[na:], kernel, want_grad)
    _check_finite(np.asarray(value), "kernel statistic")
    if not want_grad:
        return value, None, None

    dranks = np.vstack([dra, drb])
    with np.errstate(over="ignore", invalid="ignore"):
        # ranks = (plan / row_sums) @ grid
        rowdot = (dranks * ranks).sum(axis=1)
        dplan = (dranks @ grid.T - rowdot[:, None]) / row_sums[:, None]
        # plan = exp(phi + gamma - scaled_cost)
        g = dplan * plan
        dphi = g.sum(axis=1)
        dgamma = g.sum(axis=0)
        dk = -g
        dk = _sinkhorn_backward(history, scaled, dphi, dgamma, dk)
        dcost = dk / epsilon
        dpooled = 2.0 * (pooled * dcost.sum(axis=1)[:, None] - dcost @ grid)
    _check_finite(dpooled, "transport backward pass")
    return value, dpooled[:na], dpooled[na:]


def mmd_pair(a_block, b_block, epsilon, kernel, n_iters, want_grad=True):
    """Plain kernel MMD on the raw blocks (no transport); ablation path."""
    return mmd_unbiased_vjp(a_block, b_block, kernel, want_grad)


def swap_loss_and_grad(
    x: np.ndarray,
    xk: np.ndarray,
    epsilon: float,
    kernel: KernelSpec,
    swap_indices: tuple[int, ...],
    n_iters: int,
    want_grad: bool = True,
    pair_stat=srmmd_fixed,
):
    """Value and d(loss)/d(xk) of the paired swap loss on pre-shuffled rows.

    The two terms compare (X', Xk') against the block-flipped second half
    and against the second half with the B-subset of column pairs swapped.
    """
    n, d = x.shape
    h = n // 2
    first = np.hstack([x[:h], xk[:h]])
    second_flipped = np.hstack([xk[h:], x[h:]])
    base = np.hstack([x[h:], xk[h:]])
    swapped = base.copy()
    idx = np.asarray(swap_indices, dtype=int)
    if idx.size:
        swapped[:, idx], swapped[:, idx + d] = base[:, idx + d], base[:, idx]

    v1, d1_first, d1_second = pair_stat(first, second_flipped, epsilon, kernel, n_iters, want_grad)
    v2, d2_first, d2_second = pair_stat(first, swapped, epsilon, kernel, n_iters, want_grad)
    loss = v1 + v2
    if not want_grad:
        return loss, None
    dxk = np.zeros_like(xk)
    dxk[:h] = d1_first[:, d:] + d2_first[:, d:]
    dxk[h:] = d1_second[:, :d]
    # Undo the column swap on the gradient of the swapped block (involution).
    d2_base = d2_second.copy()
    if idx.size:
        d2_base[:, idx], d2_base[:, idx + d] = d2_second[:, idx + d], d2_second[:, idx]
    dxk[h:] += d2_base[:, d:]
    return loss, dxk


def second_order_value_and_grad(x: np.ndarray, xk: np.ndarray, want_grad: bool = True):
    """Moment-matching penalty and its gradient with respect to xk.

    Mean gap, Gram gap, and off-diagonal cross-Gram gap, each squared and
    normalized by the number of columns; covariances use 1/n normalization
    on centered columns.
    """
    n, d = x.shape
    dm = xk.mean(axis=0) - x.mean(axis=0)
    xc = x - x.mean(axis=0)
    kc = xk - xk.mean(axis=0)
    gxx = xc.T @ xc / n
    gkk = kc.T @ kc / n
    gxk = xc.T @ kc / n
    gap2 = gkk - gxx
    gap3 = gxk - gxx
    off3 = gap3.copy()
    np.fill_diagonal(off3, 0.0)
    value = float(((dm * dm).sum() + (gap2 * gap2).sum() + (off3 * off3).sum()) / d)
    if not want_grad:
        return value, None
    g = np.full((n, d), 0.0)
    g += 2.0 * dm[None, :] / (n * d)
    g2 = (4.0 / (n * d)) * (kc @ gap2)
    g3 = (2.0 / (n * d)) * (xc @ off3)
    centered = g2 + g3
    g += centered - centered.mean(axis=0)
    return value, g


def dcorr_value_and_grad(x: np.ndarray, xk: np.ndarray, s: np.ndarray, want_grad: bool = True):
    """Decorrelation penalty and its gradient with respect to xk."""
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    kc = xk - xk.mean(axis=0)
    su = np.sqrt((xc * xc).mean(axis=0))
    sv = np.sqrt((kc * kc).mean(axis=0))
    if np.any(su <= 0) or np.any(sv <= 0):
        raise NumericError("non-finite values produced at stage: decorrelation penalty"
                           " (zero-variance column)")
    corr = (xc * kc).mean(axis=0) / (su * sv)
    t = corr - (1.0 - s)
    value = float((t * t).sum())
    if not want_grad:
        return value, None
    g = 2.0 * t[None, :] * (
        xc / (n * su * sv)[None, :] - (corr / (n * sv * sv))[None, :] * kc
    )
    g = g - g.mean(axis=0)
    return value, g
