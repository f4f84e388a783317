import numpy as np
import pytest

from byzsim.data import Dataset, make_blobs
from byzsim.models import (LossSpec, ModelArch, decay_mask, forward, gradient,
                           init_params, loss, predict_proba)
from oracles import finite_difference_gradient

SOFTMAX = ModelArch("softmax-regression", input_dim=4, num_classes=3)
MLP = ModelArch("mlp-1h", input_dim=4, num_classes=3, hidden_dim=5)


def random_batch(rng, arch, n=8):
    feats = rng.standard_normal((n, arch.input_dim))
    labels = rng.integers(0, arch.num_classes, size=n)
    return Dataset(feats, labels, arch.num_classes)


def test_param_count_softmax():
    assert ModelArch("softmax-regression", 2, 3).param_count() == 9


def test_param_count_mlp():
    assert MLP.param_count() == 4 * 5 + 5 + 5 * 3 + 3


def test_arch_validation():
    with pytest.raises(ValueError):
        ModelArch("mlp-1h", 4, 3)  # hidden_dim required
    with pytest.raises(ValueError):
        ModelArch("softmax-regression", 4, 3, hidden_dim=5)
    with pytest.raises(ValueError):
        ModelArch("cnn", 4, 3)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_init_deterministic(arch):
    a = init_params(arch, np.random.default_rng(7))
    b = init_params(arch, np.random.default_rng(7))
    c = init_params(arch, np.random.default_rng(8))
    assert np.array_equal(a, b)
    assert (a != c).any()
    assert a.shape == (arch.param_count(),)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_init_zero_biases_and_bounded_weights(arch, rng):
    params = init_params(arch, rng)
    mask = decay_mask(arch)
    assert np.array_equal(params[~mask], np.zeros((~mask).sum()))
    if arch.kind == "softmax-regression":
        bound = np.sqrt(6.0 / (arch.input_dim + arch.num_classes))
        assert np.abs(params[mask]).max() <= bound


def test_forward_zero_params_is_uniform():
    probs = forward(SOFTMAX, np.zeros(SOFTMAX.param_count()), np.array([1.0, -2.0, 0.5, 3.0]))
    np.testing.assert_allclose(probs, np.full(3, 1.0 / 3.0), atol=1e-12)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_forward_sums_to_one(arch, rng):
    params = init_params(arch, rng)
    probs = predict_proba(arch, params, rng.standard_normal((20, arch.input_dim)))
    assert probs.shape == (20, arch.num_classes)
    np.testing.assert_allclose(probs.sum(axis=1), np.ones(20), atol=1e-9)
    assert (probs > 0).all() and (probs < 1).all()


def logit_arch_params(logit_values):
    """softmax-regression on 1 feature whose logits equal logit_values at x=1."""
    arch = ModelArch("softmax-regression", 1, len(logit_values))
    params = np.concatenate([np.asarray(logit_values, float), np.zeros(len(logit_values))])
    return arch, params


def test_forward_hand_softmax():
    arch, params = logit_arch_params([1.0, 0.0])
    probs = forward(arch, params, np.array([1.0]))
    assert probs[0] == pytest.approx(0.7311, abs=1e-4)
    assert probs[1] == pytest.approx(0.2689, abs=1e-4)


def test_loss_uniform_prediction_is_log_c(rng):
    batch = random_batch(rng, SOFTMAX)
    value = loss(SOFTMAX, LossSpec(0.0), np.zeros(SOFTMAX.param_count()), batch)
    assert value == pytest.approx(np.log(3), abs=1e-12)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_loss_decay_decomposition(arch, rng):
    params = init_params(arch, rng)
    batch = random_batch(rng, arch)
    lam = 0.37
    gap = loss(arch, LossSpec(lam), params, batch) - loss(arch, LossSpec(0.0), params, batch)
    w = params[decay_mask(arch)]
    assert gap == pytest.approx(0.5 * lam * float(w @ w), abs=1e-9)


def test_loss_hand_single_example():
    arch, params = logit_arch_params([1.0, 0.0])
    batch = Dataset(np.array([[1.0]]), np.array([0]), 2)
    assert loss(arch, LossSpec(0.0), params, batch) == pytest.approx(0.3133, abs=1e-4)


def test_loss_empty_batch_rejected():
    empty = Dataset(np.zeros((0, 4)), np.zeros(0, dtype=int), 3)
    with pytest.raises(ValueError):
        loss(SOFTMAX, LossSpec(0.0), np.zeros(SOFTMAX.param_count()), empty)
    with pytest.raises(ValueError):
        gradient(SOFTMAX, LossSpec(0.0), np.zeros(SOFTMAX.param_count()), empty)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_loss_nonnegative(arch, rng):
    for _ in range(20):
        params = init_params(arch, rng) * rng.uniform(0.1, 3.0)
        assert loss(arch, LossSpec(rng.uniform(0, 0.1)), params, random_batch(rng, arch)) >= 0.0


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_gradient_matches_finite_differences(arch, rng):
    spec = LossSpec(1e-3)
    for _ in range(10):
        params = init_params(arch, rng)
        batch = random_batch(rng, arch)
        analytic = gradient(arch, spec, params, batch)
        numeric = finite_difference_gradient(arch, spec, params, batch)
        rel = np.linalg.norm(analytic - numeric) / max(1.0, np.linalg.norm(numeric))
        assert rel < 1e-5


def test_gradient_stationary_at_regularized_minimizer():
    # separable two-point problem; decay keeps the minimizer finite
    arch = ModelArch("softmax-regression", 2, 2)
    batch = Dataset(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0, 1]), 2)
    spec = LossSpec(0.1)
    params = np.zeros(arch.param_count())
    for _ in range(5000):
        params = params - 0.5 * gradient(arch, spec, params, batch)
    assert np.linalg.norm(gradient(arch, spec, params, batch)) < 1e-4


def test_logit_shift_invariance(rng):
    # adding a constant to every class bias shifts all logits equally
    params = init_params(SOFTMAX, rng)
    shifted = params.copy()
    shifted[~decay_mask(SOFTMAX)] += 7.5
    x = rng.standard_normal((6, SOFTMAX.input_dim))
    np.testing.assert_allclose(predict_proba(SOFTMAX, params, x),
                               predict_proba(SOFTMAX, shifted, x), atol=1e-9)


@pytest.mark.parametrize("arch", [SOFTMAX, MLP])
def test_small_sgd_step_decreases_loss(arch, rng):
    spec = LossSpec(1e-4)
    for _ in range(5):
        params = init_params(arch, rng)
        batch = random_batch(rng, arch, n=16)
        before = loss(arch, spec, params, batch)
        stepped = params - 1e-3 * gradient(arch, spec, params, batch)
        assert loss(arch, spec, stepped, batch) < before


def test_gradient_shape_validation(rng):
    with pytest.raises(ValueError):
        loss(SOFTMAX, LossSpec(0.0), np.zeros(5), random_batch(rng, SOFTMAX))
    blob = make_blobs(3, 2, 4, 1.0, rng)
    with pytest.raises(ValueError):
        predict_proba(SOFTMAX, np.zeros(SOFTMAX.param_count()), blob.features)
