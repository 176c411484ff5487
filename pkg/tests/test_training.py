import numpy as np
import pytest

from igo_pqa.autodiff import Tensor
from igo_pqa.errors import LengthMismatch, NonFiniteLoss, ShapeMismatch
from igo_pqa.model import ModelConfig, ScoreRegressor
from igo_pqa.training import (
    ADAM_EPS,
    TrainConfig,
    adamw_step,
    clip_grad_norm,
    cyclic_lr,
    evaluate,
    init_adam_state,
    l1_loss,
    l2_loss,
    predict_many,
    train,
)

TINY = ModelConfig(
    x_range=(-8.0, 8.0), y_range=(-8.0, 8.0), cell_size=1.0,
    pillar_channels=8, embed_dim=16, heads=2, encoder_layers=1,
    decoder_layers=1, patch_size=4, ffn_dim=32, head_widths=(16, 8))


def tiny_dataset(rng, n=12):
    clouds = []
    targets = []
    for _ in range(n):
        count = int(rng.integers(40, 400))
        xyz = rng.uniform(-7, 7, size=(count, 3))
        inten = rng.uniform(size=(count, 1))
        clouds.append(np.concatenate([xyz, inten], axis=1))
        targets.append(count / 4.0)
    return clouds, np.array(targets)


class TestTrainConfig:
    def test_defaults_valid(self):
        config = TrainConfig()
        assert config.loss == "l1"
        assert config.base_lr <= config.max_lr

    def test_rejects_inverted_lrs(self):
        with pytest.raises(ValueError):
            TrainConfig(base_lr=1e-2, max_lr=1e-3)

    def test_rejects_unknown_loss(self):
        with pytest.raises(ValueError):
            TrainConfig(loss="huber")

    def test_dict_round_trip(self):
        config = TrainConfig(epochs=3, seed=9)
        assert TrainConfig.from_dict(config.to_dict()) == config


class TestLosses:
    def test_l1_known_value(self):
        pred = Tensor(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(
            l1_loss(pred, [2.0, 2.0, 1.0]).values, 1.0)

    def test_l2_known_value(self):
        pred = Tensor(np.array([1.0, 3.0]))
        np.testing.assert_allclose(l2_loss(pred, [0.0, 0.0]).values, 5.0)

    def test_losses_reject_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            l1_loss(Tensor(np.ones(3)), [1.0, 2.0])

    def test_l1_gradient_is_sign_mean(self):
        pred = Tensor(np.array([3.0, -1.0, 0.5]), requires_grad=True)
        l1_loss(pred, [1.0, 1.0, 1.0]).backward()
        np.testing.assert_allclose(pred.grad, [1 / 3, -1 / 3, -1 / 3])


class TestCyclicLr:
    def test_starts_at_base(self):
        assert cyclic_lr(0, 1e-4, 1e-3, 16) == 1e-4

    def test_peak_at_half_cycle(self):
        np.testing.assert_allclose(cyclic_lr(8, 1e-4, 1e-3, 16), 1e-3)

    def test_quarter_cycle_midpoint(self):
        np.testing.assert_allclose(
            cyclic_lr(4, 2e-4, 2e-3, 16), 2e-4 + 0.5 * (2e-3 - 2e-4))

    def test_periodic(self):
        for step in range(40):
            np.testing.assert_allclose(
                cyclic_lr(step, 1e-4, 1e-3, 16),
                cyclic_lr(step + 16, 1e-4, 1e-3, 16))

    def test_bounded(self):
        for step in range(50):
            lr = cyclic_lr(step, 1e-4, 1e-3, 12)
            assert 1e-4 <= lr <= 1e-3


class TestAdamW:
    def test_first_step_is_signed_lr(self):
        # with bias correction, step 1 moves by ~lr * sign(g)
        params = {"w": np.array([1.0, 1.0])}
        grads = {"w": np.array([0.3, -0.7])}
        state = init_adam_state(params)
        adamw_step(params, grads, state, lr=0.1)
        expected = 1.0 - 0.1 * grads["w"] / (np.abs(grads["w"]) + ADAM_EPS)
        np.testing.assert_allclose(params["w"], expected, atol=1e-9)

    def test_zero_grad_leaves_param(self):
        params = {"w": np.array([2.0])}
        state = init_adam_state(params)
        adamw_step(params, {"w": np.zeros(1)}, state, lr=0.1)
        np.testing.assert_allclose(params["w"], [2.0])

    def test_decoupled_weight_decay(self):
        params = {"w": np.array([10.0])}
        state = init_adam_state(params)
        adamw_step(params, {"w": np.zeros(1)}, state, lr=0.1,
                   weight_decay=0.01)
        # pure decay: w -= lr * wd * w
        np.testing.assert_allclose(params["w"], [10.0 * (1 - 0.001)])

    def test_updates_in_place(self):
        w = np.array([1.0])
        params = {"w": w}
        state = init_adam_state(params)
        adamw_step(params, {"w": np.array([1.0])}, state, lr=0.05)
        assert params["w"] is w

    def test_rejects_shape_mismatch(self):
        params = {"w": np.ones(3)}
        state = init_adam_state(params)
        with pytest.raises(ShapeMismatch):
            adamw_step(params, {"w": np.ones(2)}, state, lr=0.1)

    def test_descends_a_quadratic(self):
        params = {"w": np.array([5.0])}
        state = init_adam_state(params)
        for _ in range(300):
            grads = {"w": 2.0 * params["w"]}
            adamw_step(params, grads, state, lr=0.05)
        assert abs(params["w"][0]) < 0.5


class TestClipGradNorm:
    def test_small_grads_untouched(self):
        grads = {"a": np.array([0.3, 0.4])}
        norm = clip_grad_norm(grads, max_norm=10.0)
        np.testing.assert_allclose(norm, 0.5)
        np.testing.assert_allclose(grads["a"], [0.3, 0.4])

    def test_large_grads_scaled_to_max(self):
        grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
        norm = clip_grad_norm(grads, max_norm=1.0)
        np.testing.assert_allclose(norm, 5.0)
        total = sum(float((g ** 2).sum()) for g in grads.values())
        np.testing.assert_allclose(np.sqrt(total), 1.0)

    def test_scales_in_place(self):
        a = np.array([10.0])
        grads = {"a": a}
        clip_grad_norm(grads, max_norm=1.0)
        assert grads["a"] is a
        np.testing.assert_allclose(a, [1.0])


class TestTrain:
    def test_rejects_empty_and_mismatched(self):
        model = ScoreRegressor(TINY)
        with pytest.raises(LengthMismatch):
            train(model, [], [], TrainConfig(epochs=1))
        with pytest.raises(LengthMismatch):
            train(model, [np.zeros((4, 4))], [1.0, 2.0], TrainConfig(epochs=1))

    def test_rejects_nonfinite_target(self):
        model = ScoreRegressor(TINY)
        with pytest.raises(NonFiniteLoss):
            train(model, [np.zeros((4, 4))], [np.nan], TrainConfig(epochs=1))

    def test_loss_curve_shape_and_steps(self):
        rng = np.random.default_rng(0)
        clouds, targets = tiny_dataset(rng, n=8)
        model = ScoreRegressor(TINY, seed=0)
        config = TrainConfig(epochs=2, batch_size=4, seed=0)
        result = train(model, clouds, targets, config)
        assert len(result.loss_curve) == 2
        assert result.steps == 4  # 2 batches/epoch * 2 epochs
        assert result.final_loss == result.loss_curve[-1]
        assert all(np.isfinite(v) for v in result.loss_curve)

    def test_same_seed_bit_identical_curve(self):
        rng = np.random.default_rng(1)
        clouds, targets = tiny_dataset(rng, n=8)
        config = TrainConfig(epochs=2, batch_size=4, seed=7)
        a = train(ScoreRegressor(TINY, seed=0), clouds, targets, config)
        b = train(ScoreRegressor(TINY, seed=0), clouds, targets, config)
        assert a.loss_curve == b.loss_curve
        for name in a.model.params:
            np.testing.assert_array_equal(
                a.model.params[name].values, b.model.params[name].values)

    def test_different_shuffle_seed_changes_curve(self):
        rng = np.random.default_rng(2)
        clouds, targets = tiny_dataset(rng, n=8)
        a = train(ScoreRegressor(TINY, seed=0), clouds, targets,
                  TrainConfig(epochs=2, batch_size=4, seed=0))
        b = train(ScoreRegressor(TINY, seed=0), clouds, targets,
                  TrainConfig(epochs=2, batch_size=4, seed=1))
        assert a.loss_curve != b.loss_curve

    def test_loss_decreases_on_small_set(self):
        rng = np.random.default_rng(3)
        clouds, targets = tiny_dataset(rng, n=8)
        model = ScoreRegressor(TINY, seed=0)
        result = train(model, clouds, targets,
                       TrainConfig(epochs=8, batch_size=4, seed=0))
        assert min(result.loss_curve[4:]) < result.loss_curve[0]

    def test_on_epoch_callback(self):
        rng = np.random.default_rng(4)
        clouds, targets = tiny_dataset(rng, n=4)
        seen = []
        train(ScoreRegressor(TINY, seed=0), clouds, targets,
              TrainConfig(epochs=3, batch_size=4, seed=0),
              on_epoch=lambda e, loss: seen.append((e, loss)))
        assert [e for e, _ in seen] == [0, 1, 2]


class TestEvaluate:
    def test_predict_many_matches_predict(self):
        rng = np.random.default_rng(5)
        clouds, _ = tiny_dataset(rng, n=4)
        model = ScoreRegressor(TINY, seed=0)
        preds = predict_many(model, clouds)
        np.testing.assert_array_equal(
            preds, [model.predict(c) for c in clouds])

    def test_evaluate_reports_all_metrics(self):
        rng = np.random.default_rng(6)
        clouds, targets = tiny_dataset(rng, n=6)
        report = evaluate(ScoreRegressor(TINY, seed=0), clouds, targets)
        assert report.n == 6
        assert -1.0 <= report.plcc <= 1.0
        assert -1.0 <= report.srcc <= 1.0
        assert report.mean_l1 >= 0.0
