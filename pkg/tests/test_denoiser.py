import struct

import numpy as np
import pytest

from ddecc_lab.channel import modulate
from ddecc_lab.codes import hard_decision, random_codeword
from ddecc_lab.denoiser import (
    ORACLE_LOGIT,
    NeuralDenoiser,
    NoisePrediction,
    OracleDenoiser,
    additive_from_multiplicative,
    architecture_for,
    build_input,
    forward_features,
    init_params,
    load_checkpoint,
    neural_backward,
    neural_forward,
    oracle_predict,
    save_checkpoint,
    timestep_from_weight,
)
from ddecc_lab.exceptions import CheckpointError, ConfigurationError, InputError, InternalError
from ddecc_lab.schedule import constant_schedule, cosine_schedule
from ddecc_lab.trainer import bce_loss


def noisy_input(code, rng, batch=4, sigma=0.6, schedule=None):
    schedule = schedule or cosine_schedule(code.m)
    x0 = modulate(random_codeword(code, rng, size=batch))
    x_t = x0 + sigma * rng.standard_normal(x0.shape)
    return x0, build_input(code, x_t, schedule)


# -- inputs -------------------------------------------------------------------------


def test_features_layout(hamming):
    s = constant_schedule(3)
    x = np.array([[0.5, -1.0, 1, 1, 1, 1, 1]])  # bit 2 wrong -> column 2 = 010
    inp = build_input(hamming, x, s)
    assert inp.syndrome_bits.tolist() == [[0, 1, 0]]
    assert inp.t.tolist() == [1]
    f = inp.features()
    assert f.shape == (1, 7 + 3 + 2)
    assert f[0, :7].tolist() == [0.5, 1, 1, 1, 1, 1, 1]
    assert f[0, 7:10].tolist() == [1, -1, 1]
    assert f[0, 10] == pytest.approx(0.01)
    assert f[0, 11] == pytest.approx(1 / 3)


def test_timestep_clamps():
    assert timestep_from_weight([0, 1, 3, 9], 4).tolist() == [1, 1, 3, 4]


# -- oracle -------------------------------------------------------------------------


def test_oracle_examples(hamming, rng):
    x0 = modulate(random_codeword(hamming, rng, size=1))
    s = cosine_schedule(3)
    assert np.all(oracle_predict(build_input(hamming, x0, s), x0).logits == -ORACLE_LOGIT)
    assert np.all(oracle_predict(build_input(hamming, -x0, s), x0).logits == ORACLE_LOGIT)
    x_t = x0.copy()
    x_t[0, [1, 4]] *= -0.3
    pred = oracle_predict(build_input(hamming, x_t, s), x0)
    assert np.flatnonzero(pred.flips[0]).tolist() == [1, 4]
    assert np.all(np.isfinite(pred.flip_probabilities))


def test_oracle_length_mismatch(hamming):
    inp = build_input(hamming, np.ones((1, 7)), cosine_schedule(3))
    with pytest.raises(InputError):
        oracle_predict(inp, np.ones((1, 6)))
    with pytest.raises(ConfigurationError):
        OracleDenoiser(np.ones((1, 6))).check_code(hamming)


# -- additive conversion -------------------------------------------------------------


def test_additive_recovers_x0_without_flips(hamming, rng):
    x0 = modulate(random_codeword(hamming, rng, size=10))
    x_t = x0 * (1 + 0.5 * rng.random(x0.shape))  # same signs, bigger magnitude
    pred = NoisePrediction(np.full(x0.shape, -5.0))
    eps = additive_from_multiplicative(x_t, pred, 0.3)
    np.testing.assert_allclose(x_t - np.sqrt(0.3) * eps, x0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("bb", [0.01, 0.2, 1.7])
def test_additive_identity_under_oracle(hamming, bb):
    rng = np.random.default_rng(int(bb * 100))
    x0 = modulate(random_codeword(hamming, rng, size=50))
    x_t = x0 + np.sqrt(bb) * rng.standard_normal(x0.shape)
    inp = build_input(hamming, x_t, cosine_schedule(3))
    eps = additive_from_multiplicative(x_t, oracle_predict(inp, x0), bb)
    rebuilt = x_t - np.sqrt(bb) * eps
    np.testing.assert_allclose(rebuilt, x0, atol=1e-12)
    assert np.array_equal(hard_decision(rebuilt), hard_decision(x0))


def test_additive_tie_is_no_flip():
    eps = additive_from_multiplicative(np.array([[0.4, -0.4]]), NoisePrediction(np.zeros((1, 2))), 0.25)
    assert eps.tolist() == [[(0.4 - 1) / 0.5, (-0.4 + 1) / 0.5]]


def test_additive_rejects_non_positive_beta_bar():
    with pytest.raises(InputError):
        additive_from_multiplicative(np.ones(3), NoisePrediction(np.zeros(3)), 0.0)


# -- network --------------------------------------------------------------------------


def test_zero_network_gives_half(hamming, rng):
    p = init_params(architecture_for(hamming, 8, 2), seed=0)
    zero = p.with_arrays([np.zeros_like(a) for a in p.arrays()])
    _, inp = noisy_input(hamming, rng)
    pred, _ = neural_forward(zero, inp)
    assert np.all(pred.logits == 0)
    assert np.all(pred.flip_probabilities == 0.5)
    loss, _ = bce_loss(pred.logits, rng.integers(0, 2, pred.logits.shape))
    assert loss == pytest.approx(np.log(2), rel=1e-15)


def test_forward_is_deterministic(hamming, rng):
    _, inp = noisy_input(hamming, rng)
    a = neural_forward(init_params(architecture_for(hamming, 16, 2), seed=5), inp)[0].logits
    b = neural_forward(init_params(architecture_for(hamming, 16, 2), seed=5), inp)[0].logits
    assert np.array_equal(a, b)
    c = neural_forward(init_params(architecture_for(hamming, 16, 2), seed=6), inp)[0].logits
    assert not np.array_equal(a, c)


def test_forward_shape_mismatch(hamming, code16_8, rng):
    p = init_params(architecture_for(code16_8, 8, 1))
    _, inp = noisy_input(hamming, rng)
    with pytest.raises(ConfigurationError):
        neural_forward(p, inp)
    with pytest.raises(ConfigurationError):
        NeuralDenoiser(p).check_code(hamming)


def test_init_bounds():
    p = init_params((12, 8, 7), seed=1)
    assert np.all(np.abs(p.weights[0]) <= 1 / np.sqrt(12))
    assert np.all(np.abs(p.weights[1]) <= 1 / np.sqrt(8))


def test_params_validation():
    p = init_params((4, 3, 2))
    with pytest.raises(ConfigurationError):
        p.with_arrays([np.full((4, 3), np.nan), p.biases[0], p.weights[1], p.biases[1]])
    with pytest.raises(ConfigurationError):
        p.with_arrays([np.zeros((3, 3)), p.biases[0], p.weights[1], p.biases[1]])
    with pytest.raises(ConfigurationError):
        init_params((4, 2), activation="gelu")


def _loss(params, X, y):
    logits, _ = forward_features(params, X)
    return bce_loss(logits, y)[0]


def max_fd_error(params, X, y, h=1e-5):
    """Norm-based relative error between analytic and central-difference gradients."""
    logits, cache = forward_features(params, X)
    _, dz = bce_loss(logits, y)
    analytic = neural_backward(params, cache, dz)
    arrays = params.arrays()
    worst = 0.0
    for k, a in enumerate(arrays):
        fd = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[k][idx] += h
            minus[k][idx] -= h
            fd[idx] = (_loss(params.with_arrays(plus), X, y) - _loss(params.with_arrays(minus), X, y)) / (2 * h)
        denom = max(np.linalg.norm(fd), np.linalg.norm(analytic[k]), 1e-12)
        worst = max(worst, np.linalg.norm(fd - analytic[k]) / denom)
    return worst


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_gradients_match_finite_differences(hamming, activation):
    rng = np.random.default_rng(17)
    sizes = architecture_for(hamming, 8, 2)
    for case in range(5):
        p = init_params(sizes, activation=activation, seed=case)
        _, inp = noisy_input(hamming, rng, batch=3)
        y = rng.integers(0, 2, size=(3, hamming.n))
        assert max_fd_error(p, inp.features(), y) < 1e-5


def test_zero_loss_gradient_gives_zero(hamming, rng):
    p = init_params(architecture_for(hamming, 8, 2), seed=2)
    _, inp = noisy_input(hamming, rng)
    _, cache = neural_forward(p, inp)
    for g in neural_backward(p, cache, np.zeros((4, hamming.n))):
        assert not g.any()


def test_duplicated_batch_doubles_gradient(hamming, rng):
    p = init_params(architecture_for(hamming, 8, 2), seed=2)
    _, inp = noisy_input(hamming, rng, batch=1)
    y = rng.integers(0, 2, size=(1, hamming.n))
    X1 = inp.features()
    X2 = np.vstack([X1, X1])
    l1, c1 = forward_features(p, X1)
    l2, c2 = forward_features(p, X2)
    g1 = neural_backward(p, c1, bce_loss(l1, y, "sum")[1])
    g2 = neural_backward(p, c2, bce_loss(l2, np.vstack([y, y]), "sum")[1])
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-14, atol=1e-300)


def test_stale_cache_rejected(hamming, rng):
    p = init_params(architecture_for(hamming, 8, 2), seed=2)
    q = init_params(architecture_for(hamming, 8, 2), seed=2)
    _, inp = noisy_input(hamming, rng)
    _, cache = neural_forward(p, inp)
    with pytest.raises(InternalError):
        neural_backward(q, cache, np.zeros((4, hamming.n)))
    with pytest.raises(InternalError):
        neural_backward(p, cache, np.zeros((3, hamming.n)))


# -- checkpoints ---------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, code16_8):
    p = init_params(architecture_for(code16_8, 12, 3), activation="relu", seed=9, schedule_kind="cosine", T=8)
    path = tmp_path / "m.ckpt"
    save_checkpoint(p, path)
    q = load_checkpoint(path, code16_8)
    assert q.equals(p)
    assert (q.activation, q.schedule_kind, q.T, q.layer_sizes) == ("relu", "cosine", 8, p.layer_sizes)
    assert [f.name for f in tmp_path.iterdir()] == ["m.ckpt"]


def test_checkpoint_layout(tmp_path):
    p = init_params((3, 2), seed=0)
    path = tmp_path / "tiny.ckpt"
    save_checkpoint(p, path)
    data = path.read_bytes()
    assert data[:8] == b"DDECCNN\x00"
    assert struct.unpack("<5I", data[8:28]) == (1, 0, 0, 0, 2)
    assert struct.unpack("<2I", data[28:36]) == (3, 2)
    assert np.array_equal(np.frombuffer(data[36:84], "<f8").reshape(3, 2), p.weights[0])
    assert len(data) == 36 + 8 * (6 + 2)


def _saved(tmp_path, hamming):
    path = tmp_path / "h.ckpt"
    save_checkpoint(init_params(architecture_for(hamming, 8, 2), seed=1), path)
    return path, path.read_bytes()


def test_checkpoint_truncated(tmp_path, hamming):
    path, data = _saved(tmp_path, hamming)
    path.write_bytes(data[:-3])
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path)
    assert err.value.field == "b2"
    path.write_bytes(data[:20])
    with pytest.raises(CheckpointError, match="architecture"):
        load_checkpoint(path)


def test_checkpoint_bad_magic_and_version(tmp_path, hamming):
    path, data = _saved(tmp_path, hamming)
    path.write_bytes(b"NOTACKPT" + data[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)
    path.write_bytes(data[:8] + struct.pack("<I", 7) + data[12:])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)
    path.write_bytes(data + b"\x00")
    with pytest.raises(CheckpointError, match="trailer"):
        load_checkpoint(path)


def test_checkpoint_wrong_code(tmp_path, hamming, code16_8):
    path, _ = _saved(tmp_path, hamming)
    with pytest.raises(ConfigurationError):
        load_checkpoint(path, code16_8)
