import numpy as np
import pytest

import byzsim.training as training
from byzsim.data import make_blobs
from byzsim.models import LossSpec, ModelArch, gradient, init_params, loss
from byzsim.training import SgdPlan, epochs_to_steps, honest_update, local_sgd

ARCH = ModelArch("softmax-regression", input_dim=2, num_classes=3)
SPEC = LossSpec(1e-4)


@pytest.fixture
def blob_data(rng):
    return make_blobs(3, 2, 20, 1.0, rng)


def test_epochs_to_steps_even():
    assert epochs_to_steps(2, 100, 50) == 4


def test_epochs_to_steps_ceiling():
    assert epochs_to_steps(2, 101, 50) == 6


def test_epochs_to_steps_server_defaults():
    assert epochs_to_steps(2, 900, 180) == 10


def test_epochs_to_steps_validation():
    with pytest.raises(ValueError):
        epochs_to_steps(0, 10, 5)


def test_sgd_plan_validation():
    with pytest.raises(ValueError):
        SgdPlan(-0.1, 1, 1)
    with pytest.raises(ValueError):
        SgdPlan(0.1, 0, 1)
    SgdPlan(0.0, 1, 1, loss_scale=0.0)  # zero rates are allowed


def test_zero_rate_returns_start_exactly(blob_data, rng):
    x0 = init_params(ARCH, rng)
    plan = SgdPlan(0.0, 7, 5)
    result = local_sgd(ARCH, SPEC, x0, blob_data, plan, np.random.default_rng(0))
    assert np.array_equal(result, x0)


def test_single_full_batch_step_identity(blob_data, rng):
    x0 = init_params(ARCH, rng)
    plan = SgdPlan(0.05, 1, len(blob_data), loss_scale=0.7)
    result = local_sgd(ARCH, SPEC, x0, blob_data, plan, np.random.default_rng(0))
    expected = x0 - (0.05 * 0.7) * gradient(ARCH, SPEC, x0, blob_data)
    np.testing.assert_allclose(result, expected, atol=1e-12)


def test_descent_on_separable_blobs():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        data = make_blobs(3, 2, 30, 0.8, rng)
        x0 = init_params(ARCH, rng)
        plan = SgdPlan(0.1, 200, 16)
        final = local_sgd(ARCH, SPEC, x0, data, plan, rng)
        assert loss(ARCH, SPEC, final, data) < loss(ARCH, SPEC, x0, data)


def test_local_sgd_bitwise_deterministic(blob_data, rng):
    x0 = init_params(ARCH, rng)
    plan = SgdPlan(0.1, 9, 4)
    a = local_sgd(ARCH, SPEC, x0, blob_data, plan, np.random.default_rng(42))
    b = local_sgd(ARCH, SPEC, x0, blob_data, plan, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_exactly_num_steps_gradient_evaluations(blob_data, rng, monkeypatch):
    calls = []
    original = training.gradient

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    monkeypatch.setattr(training, "gradient", counting)
    x0 = init_params(ARCH, rng)
    local_sgd(ARCH, SPEC, x0, blob_data, SgdPlan(0.1, 13, 6), np.random.default_rng(0))
    assert len(calls) == 13


def test_loss_scale_folds_into_rate_bitwise(blob_data, rng):
    x0 = init_params(ARCH, rng)
    scaled = local_sgd(ARCH, SPEC, x0, blob_data, SgdPlan(0.1, 8, 5, loss_scale=0.3),
                       np.random.default_rng(3))
    folded = local_sgd(ARCH, SPEC, x0, blob_data, SgdPlan(0.1 * 0.3, 8, 5, loss_scale=1.0),
                       np.random.default_rng(3))
    assert np.array_equal(scaled, folded)


def test_short_final_batch_used_as_is(rng, monkeypatch):
    # shard of 20 with batch 15: second batch must contain the 5 leftovers
    data = make_blobs(2, 2, 10, 1.0, rng)
    sizes = []
    original = training.gradient

    def recording(arch, spec, y, batch):
        sizes.append(len(batch))
        return original(arch, spec, y, batch)

    monkeypatch.setattr(training, "gradient", recording)
    x0 = init_params(ARCH, rng)
    local_sgd(ARCH, SPEC, x0, data, SgdPlan(0.1, 4, 15), np.random.default_rng(0))
    assert sizes == [15, 5, 15, 5]


def test_empty_data_rejected(rng):
    x0 = init_params(ARCH, rng)
    empty = make_blobs(3, 2, 1, 1.0, rng).subset(np.array([], dtype=int))
    with pytest.raises(ValueError):
        local_sgd(ARCH, SPEC, x0, empty, SgdPlan(0.1, 1, 1), rng)


def test_honest_update_zero_rate_is_zero(blob_data, rng):
    x0 = init_params(ARCH, rng)
    delta = honest_update(ARCH, SPEC, x0, blob_data, SgdPlan(0.0, 3, 5),
                          np.random.default_rng(0))
    assert np.array_equal(delta, np.zeros_like(x0))


def test_honest_update_one_step_full_batch(blob_data, rng):
    x0 = init_params(ARCH, rng)
    delta = honest_update(ARCH, SPEC, x0, blob_data, SgdPlan(0.1, 1, len(blob_data)),
                          np.random.default_rng(0))
    np.testing.assert_allclose(delta, -0.1 * gradient(ARCH, SPEC, x0, blob_data), atol=1e-12)
