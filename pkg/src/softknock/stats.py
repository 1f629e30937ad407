"""Two-sample statistics on raw points and on soft ranks.

Energy terms are V-statistics (``i = j`` zero terms included); the MMD is
the unbiased U-statistic. Every symmetric statistic reorders its two
arguments into a canonical order before computing, so exchanging the
arguments returns a bit-identical value rather than one that merely agrees
up to floating-point summation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import (
    DimensionError,
    InsufficientSamplesError,
    InvalidInputError,
)
from .ot import SinkhornConfig, _as_matrix, joint_soft_ranks

PAPER_BANDWIDTHS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian mixture kernel: mean of exp(-||x-y||^2 / (2 sigma_i^2)).

    Bounded by 1 with k(x, x) = 1, so the unbiased MMD lies in [-2, 2].
    """

    bandwidths: tuple[float, ...] = PAPER_BANDWIDTHS
    kind: str = "gaussian-mixture"

    def __post_init__(self):
        if self.kind != "gaussian-mixture":
            raise InvalidInputError(f"unsupported kernel kind: {self.kind!r}")
        if len(self.bandwidths) == 0:
            raise InvalidInputError("kernel needs at least one bandwidth")
        if any(b <= 0 for b in self.bandwidths):
            raise InvalidInputError("kernel bandwidths must be positive")
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))


@dataclass(frozen=True)
class SwapPattern:
    """Subset of zero-based column indices to exchange with their twins."""

    indices: tuple[int, ...]
    d: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise InvalidInputError("swap indices must be unique")
        if any(i < 0 or i >= self.d for i in idx):
            raise InvalidInputError(f"swap indices must lie in [0, {self.d})")
        object.__setattr__(self, "indices", idx)


def mixture_kernel(sq_dists: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Apply the mixture kernel to a matrix of squared distances."""
    out = np.zeros_like(sq_dists)
    for sigma in kernel.bandwidths:
        out += np.exp(-sq_dists / (2.0 * sigma * sigma))
    out /= len(kernel.bandwidths)
    return out


def _paired(a, b, names=("a", "b")):
    am = _as_matrix(a, names[0])
    bm = _as_matrix(b, names[1])
    if am.shape[1] != bm.shape[1]:
        raise DimensionError(
            f"{names[0]} has dimension {am.shape[1]} but {names[1]} has {bm.shape[1]}"
        )
    return am, bm


def _canonical(a: np.ndarray, b: np.ndarray):
    """Deterministic argument order so symmetric statistics are bit-exact."""
    ka = (a.shape[0], a.tobytes())
    kb = (b.shape[0], b.tobytes())
    return (a, b) if ka <= kb else (b, a)


def energy_distance(a, b) -> float:
    """V-statistic energy distance between two samples.

    2/(mn) sum ||a_i - b_j|| - 1/m^2 sum ||a_i - a_j|| - 1/n^2 sum ||b_i - b_j||.
    """
    am, bm = _paired(a, b)
    am, bm = _canonical(am, bm)
    m, n = am.shape[0], bm.shape[0]
    cross = cdist(am, bm).sum()
    within_a = cdist(am, am).sum()
    within_b = cdist(bm, bm).sum()
    return float(2.0 * cross / (m * n) - within_a / (m * m) - within_b / (n * n))


def mmd_unbiased(a, b, kernel: KernelSpec | None = None) -> float:
    """Unbiased squared-MMD estimate; may be slightly negative under the null."""
    kernel = kernel or KernelSpec()
    am, bm = _paired(a, b)
    if am.shape[0] < 2 or bm.shape[0] < 2:
        raise InsufficientSamplesError("unbiased MMD needs at least 2 rows per sample")
    am, bm = _canonical(am, bm)
    m, n = am.shape[0], bm.shape[0]
    kaa = mixture_kernel(cdist(am, am, "sqeuclidean"), kernel)
    kbb = mixture_kernel(cdist(bm, bm, "sqeuclidean"), kernel)
    kab = mixture_kernel(cdist(am, bm, "sqeuclidean"), kernel)
    within_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    within_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    cross = 2.0 * kab.sum() / (m * n)
    return float(within_a - cross + within_b)


def soft_rank_energy(x, y, epsilon: float, cfg: SinkhornConfig | None = None) -> float:
    """Energy distance between the joint soft ranks of the two samples."""
    xm, ym = _paired(x, y, names=("x", "y"))
    xm, ym = _canonical(xm, ym)
    rx, ry = joint_soft_ranks(xm, ym, epsilon, cfg)
    return energy_distance(rx.ranks, ry.ranks)


def rank_energy(x, y) -> float:
    """Energy distance between hard ranks (exact-assignment route)."""
    return soft_rank_energy(x, y, 0.0)


def soft_rank_mmd(
    x,
    y,
    epsilon: float,
    kernel: KernelSpec | None = None,
    cfg: SinkhornConfig | None = None,
) -> float:
    """Unbiased MMD between the joint soft ranks of the two samples.

    ``epsilon = 0`` routes through the exact assignment, i.e. the hard-rank
    variant of the statistic.
    """
    kernel = kernel or KernelSpec()
    xm, ym = _paired(x, y, names=("x", "y"))
    if xm.shape[0] < 2 or ym.shape[0] < 2:
        raise InsufficientSamplesError("soft-rank MMD needs at least 2 rows per sample")
    xm, ym = _canonical(xm, ym)
    rx, ry = joint_soft_ranks(xm, ym, epsilon, cfg)
    return mmd_unbiased(rx.ranks, ry.ranks, kernel)


# Short aliases matching the statistic's usual acronyms.
sre = soft_rank_energy
srmmd = soft_rank_mmd


def apply_swap(joint, pattern: SwapPattern) -> np.ndarray:
    """Exchange columns j and d + j of a width-2d matrix for j in the pattern."""
    jm = _as_matrix(joint, "joint")
    width = jm.shape[1]
    if width % 2 != 0:
        raise DimensionError(f"joint matrix width must be even, got {width}")
    d = width // 2
    if pattern.d != d:
        raise DimensionError(
            f"pattern is for d={pattern.d} but joint matrix has d={d}"
        )
    out = jm.copy()
    idx = list(pattern.indices)
    if idx:
        left = np.array(idx, dtype=int)
        right = left + d
        out[:, left], out[:, right] = jm[:, right], jm[:, left]
    return out


def swap_loss_srmmd(
    x,
    x_knock,
    epsilon: float,
    kernel: KernelSpec | None = None,
    rng: np.random.Generator | None = None,
    cfg: SinkhornConfig | None = None,
    swap_indices: tuple[int, ...] | None = None,
) -> float:
    """Paired swap loss used to train the knockoff generator.

    Rows split deterministically into first/second half (callers shuffle
    beforehand); the swap subset B is drawn from ``rng`` with each column
    included with probability 1/2, unless ``swap_indices`` overrides it
    (testing hook).
    """
    kernel = kernel or KernelSpec()
    xm, km = _paired(x, x_knock, names=("x", "x_knock"))
    if xm.shape != km.shape:
        raise DimensionError(
            f"x shape {xm.shape} does not match x_knock shape {km.shape}"
        )
    n, d = xm.shape
    if n % 2 != 0 or n < 4:
        raise DimensionError(f"row count must be even and >= 4, got {n}")
    if swap_indices is None:
        if rng is None:
            raise InvalidInputError("rng is required when swap_indices is not given")
        mask = rng.random(d) < 0.5
        swap_indices = tuple(int(j) for j in np.flatnonzero(mask))
    pattern = SwapPattern(indices=swap_indices, d=d)
    h = n // 2
    first = np.hstack([xm[:h], km[:h]])
    second_flipped = np.hstack([km[h:], xm[h:]])
    second_swapped = apply_swap(np.hstack([xm[h:], km[h:]]), pattern)
    term_flip = soft_rank_mmd(first, second_flipped, epsilon, kernel, cfg)
    term_swap = soft_rank_mmd(first, second_swapped, epsilon, kernel, cfg)
    return term_flip + term_swap
