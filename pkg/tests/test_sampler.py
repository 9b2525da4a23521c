import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddecc_lab.channel import modulate
from ddecc_lab.codes import hard_decision, random_codeword
from ddecc_lab.denoiser import (
    NeuralDenoiser,
    OracleDenoiser,
    additive_from_multiplicative,
    architecture_for,
    build_input,
    init_params,
    oracle_predict,
)
from ddecc_lab.exceptions import ConfigurationError, InputError
from ddecc_lab.sampler import (
    DEFAULT_LAMBDA_GRID,
    SamplingMethod,
    decode,
    lambda_search,
    reverse_step,
)
from ddecc_lab.schedule import constant_schedule, cosine_schedule, step_coefficient


def received(code, rng, size, sigma):
    x0 = modulate(random_codeword(code, rng, size=size))
    return x0, x0 + sigma * rng.standard_normal(x0.shape)


# -- method ------------------------------------------------------------------------


def test_method_schedules():
    assert SamplingMethod("linear").schedule_kind == "constant"
    assert SamplingMethod("integrated").schedule_kind == "cosine"
    cos = SamplingMethod("cosine", (3.0, 4.0))
    assert cos.lambda_grid == (1.0,) and not cos.searches


@pytest.mark.parametrize("grid", [(), (0.0, 1.0), (2.0, 1.0), (1.0, 1.0)])
def test_method_rejects_bad_grids(grid):
    with pytest.raises(InputError):
        SamplingMethod("integrated", grid)


def test_unknown_method():
    with pytest.raises(InputError):
        SamplingMethod("ddim")


# -- reverse step ---------------------------------------------------------------------


def test_reverse_step_examples():
    s = constant_schedule(4)
    x = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(reverse_step(x, np.zeros(3), s, 2), x)
    np.testing.assert_allclose(reverse_step(x, np.ones(3), s, 1), x - 0.05, rtol=0, atol=1e-16)
    eps = np.array([0.5, -1.0, 0.25])
    c = step_coefficient(s, 3)
    assert np.array_equal(reverse_step(x, eps, s, 3, lam=2.0), x - (2.0 * c) * eps)


def test_reverse_step_rejects_bad_t():
    with pytest.raises(InputError):
        reverse_step(np.ones(3), np.ones(3), constant_schedule(4), 5)


# -- lambda search ---------------------------------------------------------------------


def test_lambda_search_zero_eps_ties_to_smallest(hamming):
    lam, w = lambda_search(np.array([1.0, -1, 1, 1, 1, 1, 0.5]), np.zeros(7), cosine_schedule(3), 2, hamming)
    assert lam == 1.0
    assert w == hamming.syndrome_weight(hard_decision(np.array([1.0, -1, 1, 1, 1, 1, 0.5])))


def brute_force(x, eps, schedule, t, code, grid):
    c = step_coefficient(schedule, t)
    weights = [int(code.syndrome_bits(hard_decision(x - (g * c) * eps)).sum()) for g in grid]
    best = min(weights)
    return grid[weights.index(best)], best


def test_lambda_search_matches_brute_force(code16_8):
    rng = np.random.default_rng(4)
    s = cosine_schedule(code16_8.m)
    for _ in range(200):
        x = rng.normal(0, 1.5, code16_8.n)
        eps = rng.normal(0, 1, code16_8.n)
        t = int(rng.integers(1, s.steps + 1))
        assert lambda_search(x, eps, s, t, code16_8) == brute_force(x, eps, s, t, code16_8, DEFAULT_LAMBDA_GRID)


def test_lambda_search_batch_matches_rows(code16_8):
    rng = np.random.default_rng(5)
    s = constant_schedule(8)
    X, E = rng.normal(size=(30, 16)), rng.normal(size=(30, 16))
    t = rng.integers(1, 9, size=30)
    lam, w = lambda_search(X, E, s, t, code16_8)
    for i in range(30):
        assert (lam[i], w[i]) == lambda_search(X[i], E[i], s, int(t[i]), code16_8)


def test_lambda_star_no_worse_than_one(hamming):
    rng = np.random.default_rng(6)
    s = cosine_schedule(3)
    for _ in range(100):
        x0, y = received(hamming, rng, 1, 0.8)
        inp = build_input(hamming, y, s)
        t = int(inp.t[0])
        eps = additive_from_multiplicative(y, oracle_predict(inp, x0), s.beta_bar(t))[0]
        _, w_star = lambda_search(y[0], eps, s, t, hamming)
        _, w_one = lambda_search(y[0], eps, s, t, hamming, grid=(1.0,))
        assert w_star <= w_one


# -- decode -------------------------------------------------------------------------------


def test_decode_codeword_stops_immediately(hamming, rng):
    x0 = modulate(random_codeword(hamming, rng, size=1))[0]
    r = decode(x0, hamming, OracleDenoiser(x0), SamplingMethod("cosine"))
    assert r.iterations.tolist() == [0] and r.converged.tolist() == [True]
    assert np.array_equal(r.decoded, hard_decision(x0))


def test_decode_oracle_recovers_hamming(hamming):
    rng = np.random.default_rng(8)
    x0, y = received(hamming, rng, 2000, 0.5)
    r = decode(y, hamming, OracleDenoiser(x0), SamplingMethod("cosine"), budget=50)
    assert np.array_equal(r.decoded, hard_decision(x0))
    assert r.converged.all()
    zero = hamming.syndrome_weight(hard_decision(y)) == 0
    assert np.array_equal(r.iterations == 0, zero)


def test_decode_budget_zero_is_hard_decision(hamming, rng):
    x0, y = received(hamming, rng, 50, 0.9)
    r = decode(y, hamming, OracleDenoiser(x0), SamplingMethod("integrated"), budget=0)
    assert np.array_equal(r.decoded, hard_decision(y))
    assert np.array_equal(r.converged, hamming.syndrome_weight(hard_decision(y)) == 0)
    assert np.all(r.iterations == 0)


def test_decode_result_invariants(code16_8):
    rng = np.random.default_rng(9)
    x0, y = received(code16_8, rng, 300, 1.0)
    den = NeuralDenoiser(init_params(architecture_for(code16_8, 8, 1), seed=0))
    r = decode(y, code16_8, den, SamplingMethod("integrated"), budget=5)
    assert np.all(r.iterations <= 5)
    assert np.all(code16_8.syndrome_weight(r.decoded[r.converged]) == 0)
    assert np.all(r.iterations[~r.converged] == 5)


def test_decode_rejects_mismatched_denoiser(hamming, code16_8):
    den = NeuralDenoiser(init_params(architecture_for(code16_8, 8, 1)))
    with pytest.raises(ConfigurationError):
        decode(np.ones(7), hamming, den, SamplingMethod("cosine"))
    with pytest.raises(InputError):
        decode(np.ones(6), hamming, OracleDenoiser(np.ones(7)), SamplingMethod("cosine"))


def _trajectories(y, code, den, method, schedule=None, T=None):
    r = decode(y, code, den, method, budget=20, T=T, schedule=schedule, record=True)
    return r, [s.copy() for s in r.states]


def test_integrated_unit_grid_equals_cosine(code16_8):
    rng = np.random.default_rng(10)
    x0, y = received(code16_8, rng, 300, 0.9)
    den = NeuralDenoiser(init_params(architecture_for(code16_8, 8, 2), seed=3))
    a, sa = _trajectories(y, code16_8, den, SamplingMethod("cosine"))
    b, sb = _trajectories(y, code16_8, den, SamplingMethod("integrated", (1.0,)))
    assert len(sa) == len(sb) and all(np.array_equal(p, q) for p, q in zip(sa, sb))
    assert np.array_equal(a.iterations, b.iterations)


def test_integrated_on_constant_schedule_equals_linear(code16_8):
    rng = np.random.default_rng(11)
    x0, y = received(code16_8, rng, 300, 0.9)
    den = OracleDenoiser(x0)
    a, sa = _trajectories(y, code16_8, den, SamplingMethod("linear"))
    b, sb = _trajectories(y, code16_8, den, SamplingMethod("integrated"), schedule=constant_schedule(code16_8.m))
    assert len(sa) == len(sb) and all(np.array_equal(p, q) for p, q in zip(sa, sb))
    assert np.array_equal(a.iterations, b.iterations)


def test_decode_single_word_shape(hamming, rng):
    x0, y = received(hamming, rng, 1, 0.4)
    r = decode(y[0], hamming, OracleDenoiser(x0), SamplingMethod("cosine"))
    assert r.decoded.shape == (7,)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 2.0), st.integers(1, 3))
def test_oracle_step_contracts(seed, sigma, t):
    from ddecc_lab.codes import hamming_7_4

    code = hamming_7_4()
    rng = np.random.default_rng(seed)
    x0, y = received(code, rng, 1, sigma)
    s = cosine_schedule(3)
    inp = build_input(code, y, s, t=t)
    eps = additive_from_multiplicative(y, oracle_predict(inp, x0), s.beta_bar(t))
    nxt = reverse_step(y, eps, s, t)
    before, after = np.linalg.norm(y - x0), np.linalg.norm(nxt - x0)
    if before > 0:
        assert after < before
