import numpy as np
import pytest

from softknock import (
    KernelSpec,
    TrainingConfig,
    forward,
    gradient,
    init_params,
    load_model,
    sample_knockoffs,
    save_model,
    second_order_loss,
    total_loss,
    train,
)
from softknock.decorrelation import SdpSolution
from softknock.exceptions import DimensionError, InvalidInputError, NumericError
from softknock.generator import GeneratorParams, _draws_for_batch, _loss_and_grad
from softknock.stats import swap_loss_srmmd
from softknock.ot import SinkhornConfig
from softknock.decorrelation import d_corr


def tiny_cfg(**overrides):
    defaults = dict(
        epsilon=2.0,
        lambda_so=0.5,
        delta_corr=0.25,
        learning_rate=0.05,
        batch_size=8,
        epochs=2,
        seed=3,
        kernel=KernelSpec((0.5, 2.0)),
        sinkhorn_iters=20,
    )
    defaults.update(overrides)
    return TrainingConfig(**defaults)


def make_s(d):
    return SdpSolution(s=np.full(d, 0.5), feasibility_gap=0.5, objective=0.5 * d)


# --- forward -----------------------------------------------------------------

def test_forward_zero_params_zero_output():
    cfg = tiny_cfg()
    params = init_params(3, np.random.default_rng(0), cfg)
    for w in params.weights:
        w[:] = 0.0
    for b in params.biases:
        b[:] = 0.0
    x = np.random.default_rng(1).random((5, 3))
    v = np.random.default_rng(2).random((5, 3))
    assert np.array_equal(forward(params, x, v), np.zeros((5, 3)))


def test_forward_deterministic():
    cfg = tiny_cfg()
    params = init_params(2, np.random.default_rng(3), cfg)
    rng = np.random.default_rng(4)
    x, v = rng.random((6, 2)), rng.random((6, 2))
    assert np.array_equal(forward(params, x, v), forward(params, x, v))


def test_forward_hand_traced_two_layer():
    # 1 feature, one hidden unit per layer chain with hand-set weights
    params = GeneratorParams(
        layer_dims=(2, 2, 1),
        weights=[np.array([[1.0, 0.5], [-1.0, 2.0]]), np.array([[1.0], [1.0]])],
        biases=[np.array([0.5, -0.25]), np.array([0.125])],
        leaky_slope=0.01,
    )
    x = np.array([[2.0]])
    v = np.array([[1.0]])
    z1 = np.array([2.0 * 1.0 + 1.0 * -1.0 + 0.5, 2.0 * 0.5 + 1.0 * 2.0 - 0.25])
    a1 = np.where(z1 > 0, z1, 0.01 * z1)
    expected = a1 @ np.array([1.0, 1.0]) + 0.125
    assert forward(params, x, v)[0, 0] == pytest.approx(expected, abs=1e-15)


def test_forward_shape_validation():
    params = init_params(3, np.random.default_rng(5), tiny_cfg())
    with pytest.raises(DimensionError):
        forward(params, np.zeros((4, 2)), np.zeros((4, 2)))
    with pytest.raises(DimensionError):
        forward(params, np.zeros((4, 3)), np.zeros((5, 3)))


def test_architecture_matches_descriptor():
    cfg = tiny_cfg(hidden_layers=6, hidden_multiplier=5)
    params = init_params(4, np.random.default_rng(6), cfg)
    assert params.layer_dims == (8, 20, 20, 20, 20, 20, 20, 4)
    params.validate()


# --- second-order loss ----------------------------------------------------------

def test_second_order_zero_for_identical():
    rng = np.random.default_rng(7)
    x = rng.random((20, 4))
    assert second_order_loss(x, x.copy()) == pytest.approx(0.0, abs=1e-14)


def test_second_order_constant_shift():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((200, 5))
    c = 0.37
    # per-column shift: mean term contributes d * c^2 / d = c^2, Gram terms 0
    assert second_order_loss(x, x + c) == pytest.approx(c * c, abs=1e-12)


def test_second_order_row_permutation_invariant():
    rng = np.random.default_rng(9)
    x = rng.random((30, 3))
    xk = rng.random((30, 3))
    perm = rng.permutation(30)
    assert second_order_loss(x, xk) == pytest.approx(
        second_order_loss(x[perm], xk[perm]), abs=1e-12
    )


# --- loss assembly ----------------------------------------------------------------

def test_total_loss_weight_zero_reduces_to_swap_term():
    cfg = tiny_cfg(lambda_so=0.0, delta_corr=0.0)
    params = init_params(2, np.random.default_rng(10), cfg)
    rng = np.random.default_rng(11)
    batch = rng.standard_normal((8, 2))
    breakdown = total_loss(params, batch, cfg, make_s(2), np.random.default_rng(12))
    assert breakdown.total == breakdown.srmmd_term


def test_total_loss_identity_is_exact():
    cfg = tiny_cfg()
    params = init_params(3, np.random.default_rng(13), cfg)
    rng = np.random.default_rng(14)
    batch = rng.standard_normal((8, 3))
    b = total_loss(params, batch, cfg, make_s(3), np.random.default_rng(15))
    assert b.total == b.srmmd_term + cfg.lambda_so * b.second_order_term + cfg.delta_corr * b.decorrelation_term


def test_total_loss_seeded_reproducible():
    cfg = tiny_cfg()
    params = init_params(2, np.random.default_rng(16), cfg)
    batch = np.random.default_rng(17).standard_normal((8, 2))
    a = total_loss(params, batch, cfg, make_s(2), np.random.default_rng(9))
    b = total_loss(params, batch, cfg, make_s(2), np.random.default_rng(9))
    assert a == b


def test_total_loss_matches_recomposition_from_standalone_ops():
    # tiny instance: rebuild the three terms from the public operations
    cfg = tiny_cfg(batch_size=4)
    d = 2
    params = init_params(d, np.random.default_rng(18), cfg)
    batch = np.random.default_rng(19).standard_normal((4, d))
    s = make_s(d)
    got = total_loss(params, batch, cfg, s, np.random.default_rng(42))

    probe = np.random.default_rng(42)
    noise, swap_indices = _draws_for_batch(probe, 4, d)
    xk = forward(params, batch, noise)
    swap = swap_loss_srmmd(
        batch, xk, cfg.epsilon, cfg.kernel,
        cfg=SinkhornConfig(max_iters=cfg.sinkhorn_iters, tolerance=0.0),
        swap_indices=swap_indices,
    )
    so = second_order_loss(batch, xk)
    dc = d_corr(batch, xk, s)
    expected = swap + cfg.lambda_so * so + cfg.delta_corr * dc
    assert got.total == pytest.approx(expected, abs=1e-10)
    assert got.srmmd_term == pytest.approx(swap, abs=1e-12)
    assert got.second_order_term == pytest.approx(so, abs=1e-12)
    assert got.decorrelation_term == pytest.approx(dc, abs=1e-12)


# --- gradient ----------------------------------------------------------------------

def finite_difference_probe(params, batch, cfg, s, seed, coords, h=1e-5):
    """Max relative error between the analytic gradient and central
    differences over the requested parameter coordinates.

    Central differences at step 1e-5 on a loss of scale ~1 carry ~1e-10 of
    absolute rounding noise, so coordinates whose gradient sits below 1e-5
    are compared in absolute terms (the usual atol+rtol gradcheck form).
    """
    grads = gradient(params, batch, cfg, s, np.random.default_rng(seed))

    def loss_value():
        rng = np.random.default_rng(seed)
        noise, swap_indices = _draws_for_batch(rng, batch.shape[0], params.feature_dim)
        b, _ = _loss_and_grad(params, batch, cfg, s.s, noise, swap_indices, want_grad=False)
        return b.total

    worst = 0.0
    for kind, layer, idx in coords:
        arr = params.weights[layer] if kind == "w" else params.biases[layer]
        garr = grads.weights[layer] if kind == "w" else grads.biases[layer]
        orig = arr[idx]
        arr[idx] = orig + h
        up = loss_value()
        arr[idx] = orig - h
        down = loss_value()
        arr[idx] = orig
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - garr[idx]) / max(abs(fd), abs(garr[idx]), 1e-5))
    return worst


def test_gradient_zero_network_output_bias():
    # zero weights and lambda = delta = 0: probe the output bias, which acts
    # after every rectifier and so avoids their kink at zero
    cfg = tiny_cfg(lambda_so=0.0, delta_corr=0.0)
    d = 2
    params = init_params(d, np.random.default_rng(20), cfg)
    for w in params.weights:
        w[:] = 0.0
    for b in params.biases:
        b[:] = 0.0
    batch = np.random.default_rng(21).standard_normal((8, d))
    coords = [("b", len(params.biases) - 1, (j,)) for j in range(d)]
    err = finite_difference_probe(params, batch, cfg, make_s(d), 7, coords)
    assert err < 1e-4


def test_gradient_random_network_50_coordinates():
    cfg = tiny_cfg()
    d = 3
    params = init_params(d, np.random.default_rng(22), cfg)
    batch = np.random.default_rng(23).standard_normal((8, d))
    probe = np.random.default_rng(24)
    coords = []
    for _ in range(50):
        layer = int(probe.integers(len(params.weights)))
        if probe.random() < 0.8:
            i = int(probe.integers(params.weights[layer].shape[0]))
            j = int(probe.integers(params.weights[layer].shape[1]))
            coords.append(("w", layer, (i, j)))
        else:
            coords.append(("b", layer, (int(probe.integers(params.biases[layer].shape[0])),)))
    err = finite_difference_probe(params, batch, cfg, make_s(d), 11, coords)
    assert err < 1e-4


def test_gradient_masked_layer_is_zero():
    # zero out the last weight matrix: everything upstream cannot affect the
    # output, so upstream gradients vanish identically
    cfg = tiny_cfg(lambda_so=0.0, delta_corr=0.0)
    d = 2
    params = init_params(d, np.random.default_rng(25), cfg)
    params.weights[-1][:] = 0.0
    batch = np.random.default_rng(26).standard_normal((8, d))
    grads = gradient(params, batch, cfg, make_s(d), np.random.default_rng(27))
    for layer in range(len(params.weights) - 1):
        assert np.all(grads.weights[layer] == 0.0)
        assert np.all(grads.biases[layer] == 0.0)
    assert np.any(grads.weights[-1] != 0.0) or np.any(grads.biases[-1] != 0.0)


def test_gradient_consumes_rng_like_total_loss():
    cfg = tiny_cfg()
    d = 2
    params = init_params(d, np.random.default_rng(28), cfg)
    batch = np.random.default_rng(29).standard_normal((8, d))
    rng_a = np.random.default_rng(31)
    rng_b = np.random.default_rng(31)
    total_loss(params, batch, cfg, make_s(d), rng_a)
    gradient(params, batch, cfg, make_s(d), rng_b)
    # both consumed the same amount of the stream
    assert rng_a.standard_normal() == rng_b.standard_normal()


# --- training ----------------------------------------------------------------------

def test_train_zero_epochs_returns_init():
    rng = np.random.default_rng(32)
    data = rng.standard_normal((64, 3))
    cfg = tiny_cfg(epochs=0)
    model, log = train(data, cfg)
    reference = init_params(3, np.random.default_rng(cfg.seed), cfg)
    for got, want in zip(model.params.weights, reference.weights):
        assert np.array_equal(got, want)
    assert log == []


def test_train_same_seed_identical_parameters():
    rng = np.random.default_rng(33)
    data = rng.standard_normal((32, 2))
    cfg = tiny_cfg(epochs=2, batch_size=8)
    m1, log1 = train(data, cfg)
    m2, log2 = train(data, cfg)
    for w1, w2 in zip(m1.params.weights, m2.params.weights):
        assert np.array_equal(w1, w2)
    assert log1 == log2


def test_train_loss_log_identity_every_epoch():
    rng = np.random.default_rng(34)
    data = rng.standard_normal((32, 2))
    cfg = tiny_cfg(epochs=3, batch_size=8)
    _, log = train(data, cfg)
    assert len(log) == 3
    for b in log:
        assert b.total == b.srmmd_term + cfg.lambda_so * b.second_order_term + cfg.delta_corr * b.decorrelation_term


def test_train_swap_term_decreases_on_ar1_toy():
    rng = np.random.default_rng(35)
    chol = np.linalg.cholesky(0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4))))
    data = rng.standard_normal((512, 4)) @ chol.T
    cfg = TrainingConfig(
        epsilon=2.0,
        lambda_so=1.0,
        delta_corr=1.0,
        learning_rate=0.02,
        batch_size=128,
        epochs=30,
        seed=1,
        kernel=KernelSpec((0.25, 0.5, 1.0)),
        sinkhorn_iters=50,
        momentum=0.9,
    )
    _, log = train(data, cfg)
    assert log[-1].srmmd_term < log[0].srmmd_term


def test_train_rejects_constant_column():
    data = np.ones((32, 2))
    with pytest.raises(InvalidInputError):
        train(data, tiny_cfg())


def test_train_rejects_batch_larger_than_data():
    rng = np.random.default_rng(36)
    with pytest.raises(InvalidInputError):
        train(rng.standard_normal((6, 2)), tiny_cfg(batch_size=8, epochs=1))


# --- sampling and persistence ----------------------------------------------------------

def trained_toy_model(seed=37):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((64, 3)) * np.array([1.0, 2.0, 0.5]) + np.array([1.0, -2.0, 0.0])
    cfg = tiny_cfg(epochs=1, batch_size=16)
    model, _ = train(data, cfg)
    return model, data


def test_sample_knockoffs_deterministic_and_shaped():
    model, data = trained_toy_model()
    a = sample_knockoffs(model, data, seed=5)
    b = sample_knockoffs(model, data, seed=5)
    assert np.array_equal(a, b)
    assert a.shape == data.shape
    assert not np.array_equal(a, sample_knockoffs(model, data, seed=6))


def test_sample_knockoffs_dimension_check():
    model, _ = trained_toy_model()
    with pytest.raises(DimensionError):
        sample_knockoffs(model, np.zeros((5, 2)), seed=0)


def test_model_roundtrip_bit_exact(tmp_path):
    model, data = trained_toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    for w1, w2 in zip(model.params.weights, loaded.params.weights):
        assert np.array_equal(w1, w2)
    for b1, b2 in zip(model.params.biases, loaded.params.biases):
        assert np.array_equal(b1, b2)
    assert np.array_equal(model.mean, loaded.mean)
    assert np.array_equal(model.std, loaded.std)
    assert loaded.config == model.config
    assert np.array_equal(
        sample_knockoffs(model, data, 9), sample_knockoffs(loaded, data, 9)
    )


def test_load_model_rejects_foreign_document(tmp_path):
    path = tmp_path / "not_model.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(InvalidInputError):
        load_model(path)


def test_loss_blowup_is_reported_with_context():
    rng = np.random.default_rng(38)
    data = rng.standard_normal((16, 2))
    cfg = tiny_cfg(epochs=50, batch_size=8, learning_rate=1e9, momentum=0.9)
    with pytest.raises(NumericError, match="epoch"):
        train(data, cfg)
