"""Knockoff sampler: a fully connected network trained by minibatch SGD.

The network maps a feature row concatenated with a standard-normal noise
row to a knockoff row. The training loss combines the soft-rank swap loss
with a moment-matching term and the decorrelation penalty; its gradient is
the exact gradient of the unrolled computation graph (fixed Sinkhorn
iteration count), computed by the hand-written reverse passes in
``_unrolled``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _unrolled
from .decorrelation import SdpSolution, correlation_with_ridge, solve_sdp
from .exceptions import (
    DimensionError,
    InvalidInputError,
    NumericError,
)
from .stats import KernelSpec


@dataclass
class GeneratorParams:
    """Layer weights/biases plus the architecture descriptor.

    ``layer_dims`` runs (2d, hidden..., d); hidden layers use a leaky
    rectifier, the output layer is affine.
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "leaky_relu"
    leaky_slope: float = 0.01

    def validate(self):
        if self.activation != "leaky_relu":
            raise InvalidInputError(f"unsupported activation {self.activation!r}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionError("parameter count does not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expect or b.shape != (expect[1],):
                raise DimensionError(f"layer {i} has shape {w.shape}, expected {expect}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InvalidInputError(f"layer {i} contains non-finite parameters")

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of the loss and of the SGD loop.

    ``sinkhorn_iters`` is the fixed unroll length of the scaling iterations
    inside the loss; the loss never stops early so that the computation
    graph (and hence the gradient) has a static shape.
    """

    epsilon: float = 10.0
    lambda_so: float = 1.0
    delta_corr: float = 1.0
    learning_rate: float = 0.01
    batch_size: int = 500
    epochs: int = 100
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    sinkhorn_iters: int = 100
    momentum: float = 0.0
    loss_kind: str = "srmmd"
    hidden_layers: int = 6
    hidden_multiplier: int = 5
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if self.batch_size < 4 or self.batch_size % 2 != 0:
            raise InvalidInputError(
                f"batch_size must be even and >= 4, got {self.batch_size}"
            )
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.sinkhorn_iters < 1:
            raise InvalidInputError("sinkhorn_iters must be >= 1")
        if self.loss_kind not in ("srmmd", "mmd"):
            raise InvalidInputError(f"loss_kind must be 'srmmd' or 'mmd', got {self.loss_kind!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError("momentum must lie in [0, 1)")


@dataclass(frozen=True)
class LossBreakdown:
    """One loss evaluation; total is assembled from the three terms so the
    arithmetic identity total = srmmd + lambda*so + delta*corr is exact."""

    total: float
    srmmd_term: float
    second_order_term: float
    decorrelation_term: float


@dataclass
class ParamGradients:
    """Gradient arrays mirroring GeneratorParams."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class KnockoffModel:
    """Trained sampler: parameters plus the stored standardization."""

    params: GeneratorParams
    mean: np.ndarray
    std: np.ndarray
    seed: int
    config: TrainingConfig


def init_params(d: int, rng: np.random.Generator, cfg: TrainingConfig) -> GeneratorParams:
    """Seeded uniform init scaled by 1/sqrt(fan_in).

    Weights use the rectifier-preserving gain sqrt(6) (Kaiming-uniform), so
    activations keep their scale through the six hidden layers instead of
    shrinking by ~0.4x per layer; biases stay at the plain 1/sqrt(fan_in)
    bound.
    """
    dims = (2 * d,) + (cfg.hidden_multiplier * d,) * cfg.hidden_layers + (d,)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-np.sqrt(6.0) * bound, np.sqrt(6.0) * bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return GeneratorParams(
        layer_dims=dims, weights=weights, biases=biases, leaky_slope=cfg.leaky_slope
    )


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def _mlp_forward(params: GeneratorParams, z0: np.ndarray, keep_cache: bool):
    n_layers = len(params.weights)
    pre_acts = [] if keep_cache else None
    acts = [z0] if keep_cache else None
    a = z0
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = _leaky(z, params.leaky_slope) if i < n_layers - 1 else z
        if keep_cache:
            pre_acts.append(z)
            acts.append(a)
    return a, (acts, pre_acts)


def _mlp_backward(params: GeneratorParams, cache, d_out: np.ndarray) -> ParamGradients:
    acts, pre_acts = cache
    n_layers = len(params.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = d_out
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            upstream = delta @ params.weights[i].T
            slope_mask = np.where(pre_acts[i - 1] > 0, 1.0, params.leaky_slope)
            delta = upstream * slope_mask
    return ParamGradients(weights=grad_w, biases=grad_b)


def forward(params: GeneratorParams, x, noise) -> np.ndarray:
    """Knockoff rows for (x, noise); deterministic given its inputs."""
    xm = np.asarray(x, dtype=float)
    vm = np.asarray(noise, dtype=float)
    d = params.feature_dim
    if xm.ndim != 2 or xm.shape[1] != d:
        raise DimensionError(f"x must be n x {d}, got {xm.shape}")
    if vm.shape != xm.shape:
        raise DimensionError(f"noise shape {vm.shape} does not match x shape {xm.shape}")
    out, _ = _mlp_forward(params, np.hstack([xm, vm]), keep_cache=False)
    return out


def second_order_loss(x, x_knock) -> float:
    """Moment-matching penalty (means plus Gram blocks), normalized by d."""
    xm = np.asarray(x, dtype=float)
    km = np.asarray(x_knock, dtype=float)
    if xm.shape != km.shape or xm.ndim != 2:
        raise DimensionError(f"x shape {xm.shape} does not match x_knock shape {km.shape}")
    value, _ = _unrolled.second_order_value_and_grad(xm, km, want_grad=False)
    return value


def _draws_for_batch(rng: np.random.Generator, n: int, d: int):
    """Noise first, then the swap subset; both sides of a paired
    total_loss/gradient call must consume the stream identically."""
    noise = rng.standard_normal((n, d))
    swap_indices = tuple(int(j) for j in np.flatnonzero(rng.random(d) < 0.5))
    return noise, swap_indices


def _loss_and_grad(
    params: GeneratorParams,
    batch: np.ndarray,
    cfg: TrainingConfig,
    s_vec: np.ndarray,
    noise: np.ndarray,
    swap_indices: tuple[int, ...],
    want_grad: bool = True,
):
    xk, cache = _mlp_forward(params, np.hstack([batch, noise]), keep_cache=want_grad)
    if not np.isfinite(xk).all():
        raise NumericError("non-finite values produced at stage: generator forward")
    if np.abs(xk).max() > 1e50:
        # catch a divergence spiral before the backward pass overflows
        raise NumericError("magnitude blow-up at stage: generator forward")
    pair_stat = _unrolled.srmmd_fixed if cfg.loss_kind == "srmmd" else _unrolled.mmd_pair
    swap_term, d_swap = _unrolled.swap_loss_and_grad(
        batch, xk, cfg.epsilon, cfg.kernel, swap_indices, cfg.sinkhorn_iters,
        want_grad=want_grad, pair_stat=pair_stat,
    )
    # zero-weight terms are ablations: skip them entirely (a degenerate
    # knockoff matrix must not fail a penalty that does not contribute)
    if cfg.lambda_so != 0.0:
        so_term, d_so = _unrolled.second_order_value_and_grad(batch, xk, want_grad)
    else:
        so_term, d_so = 0.0, 0.0
    if cfg.delta_corr != 0.0:
        dc_term, d_dc = _unrolled.dcorr_value_and_grad(batch, xk, s_vec, want_grad)
    else:
        dc_term, d_dc = 0.0, 0.0
    breakdown = LossBreakdown(
        total=swap_term + cfg.lambda_so * so_term + cfg.delta_corr * dc_term,
        srmmd_term=swap_term,
        second_order_term=so_term,
        decorrelation_term=dc_term,
    )
    if not want_grad:
        return breakdown, None
    dxk = d_swap + cfg.lambda_so * d_so + cfg.delta_corr * d_dc
    grads = _mlp_backward(params, cache, dxk)
    return breakdown, grads


def _check_batch(params: GeneratorParams, batch: np.ndarray):
    if batch.ndim != 2 or batch.shape[1] != params.feature_dim:
        raise DimensionError(
            f"batch must be n x {params.feature_dim}, got {batch.shape}"
        )
    if batch.shape[0] % 2 != 0 or batch.shape[0] < 4:
        raise DimensionError(f"batch row count must be even and >= 4, got {batch.shape[0]}")


def total_loss(
    params: GeneratorParams,
    batch,
    cfg: TrainingConfig,
    s_star: SdpSolution | np.ndarray,
    rng: np.random.Generator,
) -> LossBreakdown:
    """Loss on a batch with noise and swap subset drawn from ``rng``."""
    bm = np.asarray(batch, dtype=float)
    _check_batch(params, bm)
    s_vec = s_star.s if isinstance(s_star, SdpSolution) else np.asarray(s_star, dtype=float)
    noise, swap_indices = _draws_for_batch(rng, bm.shape[0], params.feature_dim)
    breakdown, _ = _loss_and_grad(params, bm, cfg, s_vec, noise, swap_indices, want_grad=False)
    return breakdown


def gradient(
    params: GeneratorParams,
    batch,
    cfg: TrainingConfig,
    s_star: SdpSolution | np.ndarray,
    rng: np.random.Generator,
) -> ParamGradients:
    """Exact gradient of the unrolled loss; consumes ``rng`` exactly like
    ``total_loss`` so a paired call sees the same draws."""
    bm = np.asarray(batch, dtype=float)
    _check_batch(params, bm)
    s_vec = s_star.s if isinstance(s_star, SdpSolution) else np.asarray(s_star, dtype=float)
    noise, swap_indices = _draws_for_batch(rng, bm.shape[0], params.feature_dim)
    _, grads = _loss_and_grad(params, bm, cfg, s_vec, noise, swap_indices, want_grad=True)
    return grads


def train(data, cfg: TrainingConfig) -> tuple[KnockoffModel, list[LossBreakdown]]:
    """Minibatch SGD for ``cfg.epochs`` epochs; reproducible from the seed.

    Data is standardized internally (the transform is stored on the model)
    and the decorrelation target s* is solved once from the ridged
    empirical correlation matrix. The log holds one per-epoch breakdown
    averaged over batches.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 4:
        raise DimensionError("training data must be a matrix with at least 4 rows")
    if not np.isfinite(x).all():
        raise InvalidInputError("training data contains non-finite entries")
    n, d = x.shape
    if cfg.epochs > 0 and n < cfg.batch_size:
        raise InvalidInputError(
            f"batch_size {cfg.batch_size} exceeds the {n} available rows"
        )
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    if np.any(std < 1e-12):
        raise InvalidInputError("a training column is constant; cannot standardize")
    xs = (x - mean) / std

    sigma = correlation_with_ridge(x)
    s_star = solve_sdp(sigma)

    rng = np.random.default_rng(cfg.seed)
    params = init_params(d, rng, cfg)
    velocity = None
    log: list[LossBreakdown] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        n_batches = n // cfg.batch_size
        sums = np.zeros(3)
        for b in range(n_batches):
            rows = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            batch = xs[rows]
            noise, swap_indices = _draws_for_batch(rng, cfg.batch_size, d)
            try:
                breakdown, grads = _loss_and_grad(
                    params, batch, cfg, s_star.s, noise, swap_indices
                )
            except NumericError as exc:
                raise NumericError(f"{exc} (epoch {epoch}, batch {b})") from exc
            if not np.isfinite(breakdown.total):
                raise NumericError(
                    f"loss became non-finite (epoch {epoch}, batch {b})"
                )
            if cfg.momentum > 0:
                if velocity is None:
                    velocity = ParamGradients(
                        weights=[np.zeros_like(w) for w in params.weights],
                        biases=[np.zeros_like(bb) for bb in params.biases],
                    )
                for i in range(len(params.weights)):
                    velocity.weights[i] = cfg.momentum * velocity.weights[i] + grads.weights[i]
                    velocity.biases[i] = cfg.momentum * velocity.biases[i] + grads.biases[i]
                    params.weights[i] -= cfg.learning_rate * velocity.weights[i]
                    params.biases[i] -= cfg.learning_rate * velocity.biases[i]
            else:
                for i in range(len(params.weights)):
                    params.weights[i] -= cfg.learning_rate * grads.weights[i]
                    params.biases[i] -= cfg.learning_rate * grads.biases[i]
            sums += (
                breakdown.srmmd_term,
                breakdown.second_order_term,
                breakdown.decorrelation_term,
            )
        means = sums / max(1, n_batches)
        log.append(
            LossBreakdown(
                total=means[0] + cfg.lambda_so * means[1] + cfg.delta_corr * means[2],
                srmmd_term=means[0],
                second_order_term=means[1],
                decorrelation_term=means[2],
            )
        )
    model = KnockoffModel(params=params, mean=mean, std=std, seed=cfg.seed, config=cfg)
    return model, log


def sample_knockoffs(model: KnockoffModel, x, seed: int) -> np.ndarray:
    """Knockoffs in the original data scale; identical for identical (x, seed)."""
    xm = np.asarray(x, dtype=float)
    d = model.params.feature_dim
    if xm.ndim != 2 or xm.shape[1] != d:
        raise DimensionError(f"x must be n x {d}, got {xm.shape}")
    xs = (xm - model.mean) / model.std
    noise = np.random.default_rng(seed).standard_normal(xm.shape)
    xk = forward(model.params, xs, noise)
    return xk * model.std + model.mean


def save_model(model: KnockoffModel, path):
    """Write a self-describing JSON document; floats keep full precision so
    a load is bit-exact."""
    doc = {
        "format": "softknock-model",
        "version": 1,
        "seed": model.seed,
        "architecture": {
            "layer_dims": list(model.params.layer_dims),
            "activation": model.params.activation,
            "leaky_slope": model.params.leaky_slope,
        },
        "standardization": {
            "mean": model.mean.tolist(),
            "std": model.std.tolist(),
        },
        "config": _config_to_doc(model.config),
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(model.params.weights, model.params.biases)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _config_to_doc(cfg: TrainingConfig) -> dict:
    doc = asdict(cfg)
    doc["kernel"] = {"bandwidths": list(cfg.kernel.bandwidths), "kind": cfg.kernel.kind}
    return doc


def _config_from_doc(doc: dict) -> TrainingConfig:
    doc = dict(doc)
    kern = doc.pop("kernel")
    return TrainingConfig(kernel=KernelSpec(tuple(kern["bandwidths"]), kern["kind"]), **doc)


def load_model(path) -> KnockoffModel:
    """Inverse of save_model; round-trips parameters bit-exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "softknock-model":
        raise InvalidInputError(f"{path} is not a softknock model document")
    arch = doc["architecture"]
    params = GeneratorParams(
        layer_dims=tuple(arch["layer_dims"]),
        weights=[np.asarray(layer["weight"], dtype=float) for layer in doc["layers"]],
        biases=[np.asarray(layer["bias"], dtype=float) for layer in doc["layers"]],
        activation=arch["activation"],
        leaky_slope=arch["leaky_slope"],
    )
    params.validate()
    return KnockoffModel(
        params=params,
        mean=np.asarray(doc["standardization"]["mean"], dtype=float),
        std=np.asarray(doc["standardization"]["std"], dtype=float),
        seed=doc["seed"],
        config=_config_from_doc(doc["config"]),
    )
