import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core.errors import DimensionMismatchError, MissingActivationsError, NonFiniteError
from modules.neuralcore import (AdamState, ForwardCache, GaussianHead, MlpParams, adam_step, backward,
                                entropy, forward, log_prob, sample_action)
from modules.neuralcore.gaussian import LOG_2PI


def _single_layer(weight, bias):
    return MlpParams(weights=[np.array(weight, dtype=float)], biases=[np.array(bias, dtype=float)])


def _naive_forward(params, x):
    h = np.array(x, dtype=float)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = np.array([sum(h[k] * w[k, j] for k in range(w.shape[0])) + b[j] for j in range(w.shape[1])])
        h = z if i == len(params.weights) - 1 else np.tanh(z)
    return h


def test_zero_weights_output_is_last_bias():
    rng = np.random.default_rng(0)
    params = MlpParams.initialize([3, 8, 8, 2], rng)
    arrays = [np.zeros_like(a) for a in params.arrays()]
    arrays[-1] = np.array([0.7, -1.3])
    params = params.with_arrays(arrays)
    mean, _ = forward(params, rng.standard_normal(3))
    np.testing.assert_array_equal(mean, [0.7, -1.3])


def test_identity_layer():
    params = _single_layer(np.eye(2), [0.0, 0.0])
    mean, log_std = forward(params, [0.3, -0.2])
    np.testing.assert_allclose(mean, [0.3, -0.2])
    assert log_std.size == 0


def test_forward_matches_naive_chain():
    rng = np.random.default_rng(1)
    for _ in range(5):
        params = MlpParams.initialize([4, 7, 5, 3], rng, output_gain=1.0)
        x = rng.standard_normal(4)
        mean, _ = forward(params, x)
        np.testing.assert_allclose(mean, _naive_forward(params, x), atol=1e-10)


def test_forward_batch_rows_match_single_inputs():
    rng = np.random.default_rng(2)
    params = MlpParams.initialize([3, 6, 2], rng, output_gain=1.0)
    batch = rng.standard_normal((5, 3))
    means, _ = forward(params, batch)
    for row, out in zip(batch, means):
        np.testing.assert_allclose(out, forward(params, row)[0], atol=1e-12)


def test_forward_rejects_bad_inputs():
    params = MlpParams.initialize([3, 4, 1], np.random.default_rng(0))
    with pytest.raises(DimensionMismatchError):
        forward(params, np.zeros(4))
    with pytest.raises(NonFiniteError):
        forward(params, np.array([0.0, np.nan, 1.0]))


def test_backward_zero_upstream_is_zero():
    rng = np.random.default_rng(3)
    params = MlpParams.initialize([3, 5, 2], rng)
    cache = ForwardCache()
    forward(params, rng.standard_normal(3), cache)
    grads = backward(params, cache, np.zeros(2))
    assert all(not np.any(a) for a in grads.arrays())


def test_backward_single_linear_layer_closed_form():
    x = np.array([0.5, -1.0, 2.0])
    params = _single_layer([[0.1], [0.2], [-0.3]], [0.05])
    cache = ForwardCache()
    mean, _ = forward(params, x, cache)
    grads = backward(params, cache, 2.0 * mean)
    np.testing.assert_allclose(grads.weights[0][:, 0], 2.0 * mean[0] * x)
    np.testing.assert_allclose(grads.biases[0], 2.0 * mean)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(4)
    h = 1e-5
    for _ in range(20):
        params = MlpParams.initialize([3, 6, 5, 2], rng, output_gain=1.0)
        x = rng.standard_normal(3)
        coeff = rng.standard_normal(2)

        def loss(p):
            return float(np.dot(coeff, forward(p, x)[0]))

        cache = ForwardCache()
        forward(params, x, cache)
        analytic = backward(params, cache, coeff).arrays()
        arrays = params.arrays()
        for k, a in enumerate(arrays):
            numeric = np.zeros_like(a)
            for idx in np.ndindex(a.shape):
                plus = [b.copy() for b in arrays]
                minus = [b.copy() for b in arrays]
                plus[k][idx] += h
                minus[k][idx] -= h
                numeric[idx] = (loss(params.with_arrays(plus)) - loss(params.with_arrays(minus))) / (2 * h)
            np.testing.assert_allclose(analytic[k], numeric, rtol=1e-4, atol=1e-8)


def test_backward_without_cache_raises():
    params = MlpParams.initialize([2, 3, 1], np.random.default_rng(0))
    with pytest.raises(MissingActivationsError):
        backward(params, ForwardCache(), np.zeros(1))
    with pytest.raises(MissingActivationsError):
        backward(params, None, np.zeros(1))


def test_adam_zero_gradient_keeps_params():
    params = MlpParams.initialize([2, 4, 1], np.random.default_rng(0))
    state = AdamState.for_params(params, stepsize=1e-2)
    new_params, new_state = adam_step(state, params, params.zeros_like())
    for a, b in zip(params.arrays(), new_params.arrays()):
        np.testing.assert_array_equal(a, b)
    assert new_state.step_count == 1


def test_adam_first_step_moves_by_stepsize():
    params = _single_layer([[0.0, 0.0]], [0.0, 0.0])
    grads = _single_layer([[0.5, -3.0]], [1e-3, -20.0])
    state = AdamState.for_params(params, stepsize=0.01)
    new_params, _ = adam_step(state, params, grads)
    for p, g in zip(new_params.arrays(), grads.arrays()):
        np.testing.assert_allclose(p, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_non_finite_gradient_raises():
    params = _single_layer([[1.0]], [0.0])
    state = AdamState.for_params(params)
    with pytest.raises(NonFiniteError):
        adam_step(state, params, _single_layer([[np.inf]], [0.0]))


def test_adam_decreases_quadratic():
    params = _single_layer([[1.0]], [1.0])
    state = AdamState.for_params(params, stepsize=0.05)

    def loss(p):
        return float(sum(np.sum(a * a) for a in p.arrays()))

    initial = loss(params)
    for _ in range(100):
        grads = params.with_arrays([2.0 * a for a in params.arrays()])
        params, state = adam_step(state, params, grads)
    assert loss(params) < initial / 10


def test_adam_updates_repeat_bit_for_bit():
    def run():
        rng = np.random.default_rng(21)
        params = MlpParams.initialize([3, 8, 2], rng)
        state = AdamState.for_params(params, stepsize=1e-3)
        for _ in range(20):
            grads = params.with_arrays([rng.normal(size=a.shape) for a in params.arrays()])
            params, state = adam_step(state, params, grads)
        return params

    first, second = run(), run()
    for a, b in zip(first.arrays(), second.arrays()):
        np.testing.assert_array_equal(a, b)


def test_log_prob_at_mode():
    for d in (1, 2, 5):
        head = GaussianHead(mean=np.zeros(d), log_std=np.zeros(d))
        assert log_prob(head, np.zeros(d)) == pytest.approx(-0.5 * d * LOG_2PI)


def test_log_prob_one_sigma_away():
    head = GaussianHead(mean=np.array([0.4]), log_std=np.array([-0.7]))
    mode = log_prob(head, head.mean)
    assert log_prob(head, head.mean + head.std) == pytest.approx(mode - 0.5)


def test_density_integrates_to_one():
    head = GaussianHead(mean=np.array([0.3]), log_std=np.array([-0.5]))
    grid = np.linspace(-10.0, 10.0, 20001)
    density = np.exp(log_prob(head, grid[:, None]))
    assert float(np.sum(density) * (grid[1] - grid[0])) == pytest.approx(1.0, abs=0.02)


def test_log_std_is_clamped():
    head = GaussianHead(mean=np.zeros(2), log_std=np.array([-9.0, 4.0]))
    np.testing.assert_array_equal(head.log_std, [-5.0, 2.0])
    assert entropy(head) == pytest.approx(-3.0 + LOG_2PI + 1.0)


def test_sample_action_uses_rng():
    head = GaussianHead(mean=np.array([1.0, -1.0]), log_std=np.array([-1.0, -1.0]))
    a = sample_action(head, np.random.default_rng(7))
    b = sample_action(head, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (2,)


def test_params_dict_round_trip():
    params = MlpParams.initialize([3, 4, 2], np.random.default_rng(5), init_log_std=-0.5)
    restored = MlpParams.from_dict(params.to_dict())
    for a, b in zip(params.arrays(), restored.arrays()):
        np.testing.assert_array_equal(a, b)
