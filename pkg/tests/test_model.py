import numpy as np
import pytest
from conftest import TOY_CONFIG
from helpers import max_relative_error, numerical_gradient

from cornspect import model
from cornspect.errors import DimensionError, UsageError, ValidationError
from cornspect.model import (
    KernelLabel,
    ModelConfig,
    OptimizerConfig,
    OptimizerState,
    accuracy,
    backward,
    bce_loss,
    build_model,
    classify,
    forward,
    optimizer_step,
    parameter_count,
)


class TestModelConfig:
    def test_default_flat_width_is_4096(self):
        assert ModelConfig().flat_dim == 64 * 8 * 8 == 4096

    def test_indivisible_input_rejected(self):
        with pytest.raises(ValidationError):
            ModelConfig(input_height=50, input_width=64)

    def test_round_trips_through_dict(self):
        cfg = ModelConfig(input_height=32, input_width=32, seed=9)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestBuildModel:
    def test_deterministic_for_fixed_seed(self):
        a = build_model(ModelConfig(seed=42))
        b = build_model(ModelConfig(seed=42))
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_different_seeds_differ(self):
        a = build_model(ModelConfig(seed=42))
        b = build_model(ModelConfig(seed=43))
        assert any(not np.array_equal(a[k], b[k]) for k in a)

    def test_parameter_count_matches_closed_form(self):
        params = build_model(TOY_CONFIG)
        assert sum(p.size for p in params.values()) == parameter_count(TOY_CONFIG)

    def test_default_parameter_count(self):
        cfg = ModelConfig()
        total = (
            16 * 3 * 9 + 16
            + 32 * 16 * 9 + 32
            + 64 * 32 * 9 + 64
            + 4096 * 64 + 64
            + 64 * 1 + 1
        )
        assert parameter_count(cfg) == total
        assert sum(p.size for p in build_model(cfg).values()) == total


class TestForward:
    def test_outputs_strictly_in_unit_interval(self, rng):
        params = build_model(TOY_CONFIG)
        probs, _ = forward(params, rng.random((5, 3, 16, 16)), TOY_CONFIG)
        assert probs.shape == (5,)
        assert np.all(probs > 0.0) and np.all(probs < 1.0)

    def test_duplicated_rows_give_identical_outputs(self, rng):
        params = build_model(TOY_CONFIG)
        row = rng.random((1, 3, 16, 16))
        probs, _ = forward(params, np.concatenate([row, row]), TOY_CONFIG)
        assert probs[0] == probs[1]

    def test_batch_of_two_equals_two_singles(self, rng):
        params = build_model(TOY_CONFIG)
        batch = rng.random((2, 3, 16, 16))
        together, _ = forward(params, batch, TOY_CONFIG)
        one, _ = forward(params, batch[:1], TOY_CONFIG)
        two, _ = forward(params, batch[1:], TOY_CONFIG)
        assert np.abs(together - np.concatenate([one, two])).max() < 1e-12

    def test_permuting_batch_permutes_outputs(self, rng):
        params = build_model(TOY_CONFIG)
        batch = rng.random((4, 3, 16, 16))
        perm = np.array([2, 0, 3, 1])
        probs, _ = forward(params, batch, TOY_CONFIG)
        permuted, _ = forward(params, batch[perm], TOY_CONFIG)
        assert np.abs(permuted - probs[perm]).max() < 1e-12

    def test_wrong_spatial_size_rejected(self, rng):
        params = build_model(TOY_CONFIG)
        with pytest.raises(DimensionError):
            forward(params, rng.random((1, 3, 24, 24)), TOY_CONFIG)


class TestBceLoss:
    def test_perfect_prediction_is_near_zero(self):
        loss, _ = bce_loss(np.array([1.0 - 1e-7]), np.array([1.0]))
        assert loss < 1e-6

    def test_uninformative_prediction_is_ln2(self):
        loss, _ = bce_loss(np.array([0.5, 0.5]), np.array([0.0, 1.0]))
        assert abs(loss - np.log(2.0)) < 1e-12

    def test_gradient_matches_finite_difference(self, rng):
        p = rng.uniform(0.05, 0.95, size=8)
        y = (rng.random(8) > 0.5).astype(np.float64)
        _, grad = bce_loss(p, y)
        numeric = numerical_gradient(lambda v: bce_loss(v, y)[0], p.copy())
        assert max_relative_error(grad, numeric) < 1e-6

    def test_loss_nonnegative(self, rng):
        p = rng.uniform(0.0, 1.0, size=50)
        y = (rng.random(50) > 0.5).astype(np.float64)
        assert bce_loss(p, y)[0] >= 0.0

    def test_bad_target_rejected(self):
        with pytest.raises(ValidationError):
            bce_loss(np.array([0.5]), np.array([0.3]))


class TestBackward:
    def test_zero_loss_grad_gives_zero_gradients(self, rng):
        params = build_model(TOY_CONFIG)
        probs, cache = forward(params, rng.random((2, 3, 16, 16)), TOY_CONFIG)
        grads = backward(params, cache, np.zeros_like(probs))
        assert all(not g.any() for g in grads.values())

    def test_gradient_keys_and_shapes_match(self, rng):
        params = build_model(TOY_CONFIG)
        probs, cache = forward(params, rng.random((2, 3, 16, 16)), TOY_CONFIG)
        grads = backward(params, cache, np.ones_like(probs))
        assert list(grads) == list(params)
        assert all(grads[k].shape == params[k].shape for k in params)

    def test_batch_mean_gradient_is_mean_of_per_example(self, rng):
        params = build_model(TOY_CONFIG)
        batch = rng.random((4, 3, 16, 16))
        targets = np.array([1.0, 0.0, 1.0, 0.0])

        probs, cache = forward(params, batch, TOY_CONFIG)
        _, loss_grad = bce_loss(probs, targets)
        batch_grads = backward(params, cache, loss_grad)

        summed = {k: np.zeros_like(v) for k, v in params.items()}
        for i in range(4):
            p_i, cache_i = forward(params, batch[i : i + 1], TOY_CONFIG)
            _, g_i = bce_loss(p_i, targets[i : i + 1])
            for k, g in backward(params, cache_i, g_i).items():
                summed[k] += g / 4.0
        for k in params:
            assert np.abs(batch_grads[k] - summed[k]).max() < 1e-10

    def test_stale_cache_rejected(self, rng):
        params = build_model(TOY_CONFIG)
        probs, cache = forward(params, rng.random((1, 3, 16, 16)), TOY_CONFIG)
        other = build_model(ModelConfig.from_dict({**TOY_CONFIG.to_dict(), "seed": 99}))
        with pytest.raises(UsageError):
            backward(other, cache, np.zeros_like(probs))

    def test_spot_check_against_finite_differences(self, rng):
        # full-tensor sweep lives in the acceptance suite; spot-check here
        params = build_model(TOY_CONFIG)
        batch = rng.uniform(0.0, 1.0, size=(2, 3, 16, 16))
        targets = np.array([1.0, 0.0])
        probs, cache = forward(params, batch, TOY_CONFIG)
        _, loss_grad = bce_loss(probs, targets)
        grads = backward(params, cache, loss_grad)

        check_rng = np.random.default_rng(0)
        for name, tensor in params.items():
            flat = tensor.reshape(-1)
            for idx in check_rng.choice(flat.size, size=min(4, flat.size), replace=False):
                orig = flat[idx]
                h = 1e-5
                flat[idx] = orig + h
                up = bce_loss(forward(params, batch, TOY_CONFIG)[0], targets)[0]
                flat[idx] = orig - h
                down = bce_loss(forward(params, batch, TOY_CONFIG)[0], targets)[0]
                flat[idx] = orig
                numeric = (up - down) / (2 * h)
                analytic = grads[name].reshape(-1)[idx]
                assert abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8) < 1e-4, name


class TestOptimizer:
    def test_zero_learning_rate_keeps_params(self):
        for kind in ("sgd", "adam"):
            params = {"w": np.array([1.0, -2.0])}
            grads = {"w": np.array([0.5, 0.5])}
            optimizer_step(params, grads, OptimizerState(), OptimizerConfig(kind, 0.0))
            assert np.array_equal(params["w"], [1.0, -2.0])

    def test_sgd_analytic_step(self):
        params = {"w": np.array([1.0])}
        optimizer_step(params, {"w": np.array([0.5])}, OptimizerState(), OptimizerConfig("sgd", 0.1))
        assert np.allclose(params["w"], [0.95])

    def test_adam_first_step_magnitude_is_learning_rate(self):
        # bias correction makes |update| ~ lr regardless of gradient scale
        lr = 1e-3
        for scale in (1e-3, 1.0, 1e3):
            params = {"w": np.array([0.0])}
            optimizer_step(
                params, {"w": np.array([scale])}, OptimizerState(), OptimizerConfig("adam", lr)
            )
            assert abs(abs(params["w"][0]) - lr) < lr * 1e-4

    def test_key_mismatch_rejected(self):
        with pytest.raises(UsageError):
            optimizer_step(
                {"w": np.zeros(1)}, {"v": np.zeros(1)}, OptimizerState(), OptimizerConfig("sgd", 0.1)
            )

    def test_determinism(self, rng):
        g = rng.normal(size=4)
        runs = []
        for _ in range(2):
            params = {"w": np.ones(4)}
            state = OptimizerState()
            for _ in range(5):
                optimizer_step(params, {"w": g}, state, OptimizerConfig("adam", 1e-2))
            runs.append(params["w"].copy())
        assert np.array_equal(runs[0], runs[1])


class TestClassify:
    def test_paper_rows(self):
        assert classify(0.000) is KernelLabel.ABNORMAL
        assert classify(0.5) is KernelLabel.ABNORMAL
        assert classify(0.857) is KernelLabel.NORMAL
        assert classify(1.000) is KernelLabel.NORMAL

    def test_out_of_range_rejected(self):
        for bad in (-0.01, 1.01):
            with pytest.raises(ValidationError):
                classify(bad)

    def test_label_encoding_round_trip(self):
        for label in KernelLabel:
            assert classify(label.encode()) is label
            assert KernelLabel.decode(label.encode()) is label

    def test_decode_rejects_other_values(self):
        with pytest.raises(ValidationError):
            KernelLabel.decode(0.5)


class TestAccuracy:
    def test_all_correct(self):
        labels = [KernelLabel.NORMAL] * 10 + [KernelLabel.ABNORMAL] * 10
        assert accuracy(labels, list(labels)) == 1.0

    def test_half_matching(self):
        preds = [KernelLabel.NORMAL, KernelLabel.NORMAL]
        actual = [KernelLabel.NORMAL, KernelLabel.ABNORMAL]
        assert accuracy(preds, actual) == 0.5

    def test_permutation_invariant(self, rng):
        preds = [classify(p) for p in rng.random(20)]
        actual = [classify(p) for p in rng.random(20)]
        base = accuracy(preds, actual)
        perm = rng.permutation(20)
        assert accuracy([preds[i] for i in perm], [actual[i] for i in perm]) == base

    def test_empty_or_mismatched_rejected(self):
        with pytest.raises(ValidationError):
            accuracy([], [])
        with pytest.raises(ValidationError):
            accuracy([KernelLabel.NORMAL], [])


def test_loss_decreases_when_overfitting_one_example(rng):
    params = build_model(TOY_CONFIG)
    batch = rng.random((1, 3, 16, 16))
    target = np.array([1.0])
    state = OptimizerState()
    opt = OptimizerConfig("sgd", 0.01)
    losses = []
    for _ in range(10):
        probs, cache = forward(params, batch, TOY_CONFIG)
        loss, loss_grad = bce_loss(probs, target)
        losses.append(loss)
        optimizer_step(params, backward(params, cache, loss_grad), state, opt)
    assert all(b < a for a, b in zip(losses, losses[1:]))
