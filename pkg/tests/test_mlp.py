import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timbre.errors import EmptyBatch, EmptySet, ShapeMismatch
from timbre.mlp import (
    ConfusionMatrix, MlpModel, TrainConfig, evaluate, forward, load_model, loss_and_gradient,
    one_hot, rprop_step, rprop_update, save_model, train_early_stopping,
)


def random_batch(rng, n=30):
    return rng.random((n, 50)), one_hot(rng.integers(0, 8, n))


def fd_gradient(model, X, T, h=1e-5):
    """Central finite differences of the loss, one weight at a time."""
    grads = []
    for w in (model.w_hidden, model.w_output):
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            up = loss_and_gradient(model, X, T)[0]
            w[idx] = orig - h
            down = loss_and_gradient(model, X, T)[0]
            w[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


class TestForward:
    def test_zero_weights_uniform(self):
        p = forward(MlpModel.zeros(), np.random.default_rng(0).random(50))
        np.testing.assert_array_equal(p, np.full(8, 0.125))

    @settings(max_examples=30)
    @given(st.integers(0, 10 ** 6))
    def test_simplex(self, seed):
        rng = np.random.default_rng(seed)
        model = MlpModel.random(seed, scale=rng.uniform(0.1, 3))
        p = forward(model, rng.normal(size=50))
        assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9

    def test_output_permutation(self):
        model = MlpModel.random(3)
        x = np.random.default_rng(4).random(50)
        p = forward(model, x)
        model.w_output[[2, 5]] = model.w_output[[5, 2]]
        q = forward(model, x)
        assert q[2] == pytest.approx(p[5]) and q[5] == pytest.approx(p[2])

    def test_bias_uses_minus_one_input(self):
        model = MlpModel.zeros()
        model.w_output[3, 0] = -2.0  # threshold -2 times input -1 adds +2 to class 3
        p = forward(model, np.zeros(50))
        assert np.argmax(p) == 3

    def test_wrong_length(self):
        with pytest.raises(ShapeMismatch):
            forward(MlpModel.zeros(), np.zeros(49))


class TestLoss:
    def test_uniform_prediction(self):
        loss, _ = loss_and_gradient(MlpModel.zeros(), np.ones((1, 50)), one_hot([4]))
        assert loss == pytest.approx(np.log(8))

    def test_finite_differences(self):
        rng = np.random.default_rng(11)
        model = MlpModel.random(11)
        X, T = random_batch(rng)
        _, grads = loss_and_gradient(model, X, T)
        for bp, fd in zip(grads, fd_gradient(model, X, T)):
            assert max_rel_error(bp, fd) <= 1e-4

    def test_duplicated_batch(self):
        rng = np.random.default_rng(12)
        model = MlpModel.random(12)
        X, T = random_batch(rng, 10)
        loss, grads = loss_and_gradient(model, X, T)
        loss2, grads2 = loss_and_gradient(model, np.vstack([X, X]), np.vstack([T, T]))
        assert loss2 == pytest.approx(loss, rel=1e-12)
        for a, b in zip(grads, grads2):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyBatch):
            loss_and_gradient(MlpModel.zeros(), np.zeros((0, 50)), np.zeros((0, 8)))


class TestRprop:
    cfg = TrainConfig()

    def test_positive_gradient_first_step(self):
        w, step, prev = rprop_update([0.5], [2.7], [0.1], [0.0], self.cfg)
        assert w[0] == pytest.approx(0.4) and step[0] == 0.1 and prev[0] == 1

    def test_zero_gradient(self):
        w, step, prev = rprop_update([0.5], [0.0], [0.1], [1.0], self.cfg)
        assert w[0] == 0.5 and step[0] == 0.1 and prev[0] == 0

    def test_sign_flip(self):
        w, step, prev = rprop_update([0.5], [-3.0], [0.1], [1.0], self.cfg)
        assert w[0] == 0.5 and step[0] == pytest.approx(0.05) and prev[0] == 0

    def test_hand_trace(self):
        w, step, prev = [0.5, -0.2, 1.0], [0.1] * 3, [0.0] * 3
        trace = [
            ([2.7, -0.3, 0.0], [0.4, -0.1, 1.0], [0.1, 0.1, 0.1]),
            ([1.0, 0.5, -4.0], [0.28, -0.1, 1.1], [0.12, 0.05, 0.1]),
            ([-1.0, 0.5, -1.0], [0.28, -0.15, 1.22], [0.06, 0.05, 0.12]),
        ]
        for grad, w_want, step_want in trace:
            w, step, prev = rprop_update(w, grad, step, prev, self.cfg)
            np.testing.assert_allclose(w, w_want, atol=1e-12)
            np.testing.assert_allclose(step, step_want, atol=1e-12)

    def test_step_bounds(self):
        cfg = TrainConfig(delta0=0.1, delta_max=0.15, delta_min=0.08)
        _, step, _ = rprop_update([0.0], [1.0], [0.14], [1.0], cfg)
        assert step[0] == 0.15
        _, step, _ = rprop_update([0.0], [-1.0], [0.1], [1.0], cfg)
        assert step[0] == 0.08

    def test_magnitude_is_step_and_scale_free(self):
        rng = np.random.default_rng(5)
        model = MlpModel.random(5)
        X, T = random_batch(rng)
        _, grads = loss_and_gradient(model, X, T)
        a = rprop_step(model, grads)
        b = rprop_step(model, [1000 * g for g in grads])
        for w0, w1, w2, s in ((model.w_hidden, a.w_hidden, b.w_hidden, model.step_hidden),
                              (model.w_output, a.w_output, b.w_output, model.step_output)):
            np.testing.assert_array_equal(w1, w2)
            moved = w1 != w0
            np.testing.assert_allclose(np.abs(w1 - w0)[moved], s[moved], rtol=1e-12)

    def test_does_not_mutate_input(self):
        model = MlpModel.random(1)
        before = model.copy()
        rprop_step(model, (np.ones_like(model.w_hidden), np.ones_like(model.w_output)))
        np.testing.assert_array_equal(model.w_hidden, before.w_hidden)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            rprop_step(MlpModel.zeros(), (np.zeros((2, 2)), np.zeros((8, 31))))


def separable_set(rng, n):
    y = rng.integers(0, 2, n)
    X = rng.random((n, 50)) * 0.5
    X[:, 0] = np.where(y == 1, 0.8, 0.2) + rng.uniform(-0.1, 0.1, n)
    return X, y


class TestTraining:
    def test_separable_reaches_full_accuracy(self):
        rng = np.random.default_rng(8)
        train, val = separable_set(rng, 60), separable_set(rng, 20)
        out = train_early_stopping(train, val, TrainConfig(seed=1))
        _, acc = evaluate(out.model, train)
        assert acc == 1.0 and out.epochs_run <= 500

    def test_adversarial_validation(self):
        rng = np.random.default_rng(9)
        X, y = separable_set(rng, 40)
        out = train_early_stopping((X, y), (X, 1 - y), TrainConfig(seed=2))
        assert out.best_epoch in (0, 1)
        assert out.epochs_run <= 151

    def test_curves_and_best_epoch(self):
        rng = np.random.default_rng(10)
        out = train_early_stopping(separable_set(rng, 40), separable_set(rng, 20),
                                   TrainConfig(seed=3, max_fail=20))
        assert len(out.validation_error_curve) == out.epochs_run + 1
        assert out.best_validation_error == min(out.validation_error_curve)
        assert out.epochs_run <= min(500, out.best_epoch + 20 + 1)

    def test_best_weights_restored(self):
        rng = np.random.default_rng(13)
        train, val = separable_set(rng, 40), separable_set(rng, 20)
        out = train_early_stopping(train, val, TrainConfig(seed=4, max_fail=10))
        loss, _ = loss_and_gradient(out.model, val[0], one_hot(val[1]))
        assert loss == pytest.approx(out.best_validation_error, rel=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(14)
        train, val = separable_set(rng, 40), separable_set(rng, 20)
        a = train_early_stopping(train, val, TrainConfig(seed=6))
        b = train_early_stopping(train, val, TrainConfig(seed=6))
        assert a.best_epoch == b.best_epoch and a.epochs_run == b.epochs_run
        assert a.validation_error_curve == b.validation_error_curve
        np.testing.assert_array_equal(a.model.w_hidden, b.model.w_hidden)

    def test_empty_sets(self):
        with pytest.raises(EmptyBatch):
            train_early_stopping((np.zeros((0, 50)), np.zeros(0)), separable_set(
                np.random.default_rng(0), 5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(eta_plus=0.9)
        with pytest.raises(ValueError):
            TrainConfig(delta0=100.0)


class TestEvaluate:
    def always(self, k):
        model = MlpModel.zeros()
        model.w_output[k, 0] = -1.0
        return model

    def test_degenerate(self):
        cm, acc = evaluate(self.always(0), (np.zeros((5, 50)), np.zeros(5, dtype=int)))
        assert acc == 1.0 and cm.counts[0, 0] == 5 and cm.total == 5

    def test_uniform_classes(self):
        y = np.repeat(np.arange(8), 3)
        cm, acc = evaluate(self.always(0), (np.zeros((24, 50)), y))
        assert acc == 0.125
        np.testing.assert_array_equal(cm.counts.sum(axis=1), np.full(8, 3))

    def test_ties_go_to_lowest_index(self):
        cm, _ = evaluate(MlpModel.zeros(), (np.zeros((4, 50)), np.array([3, 3, 5, 7])))
        assert np.all(cm.counts[:, 0] == [0, 0, 0, 2, 0, 1, 0, 1])

    def test_empty(self):
        with pytest.raises(EmptySet):
            evaluate(MlpModel.zeros(), (np.zeros((0, 50)), np.zeros(0)))

    def test_confusion_sum(self):
        a = ConfusionMatrix(np.eye(8, dtype=np.int64))
        assert (a + a).total == 16 and (a + a).accuracy == 1.0


def test_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    cfg = TrainConfig(seed=7)
    out = train_early_stopping(separable_set(rng, 30), separable_set(rng, 10), cfg)
    path = tmp_path / "model.json"
    save_model(path, out.model, cfg)
    model, cfg2 = load_model(path)
    assert cfg2 == cfg
    for a, b in zip(out.model._arrays(), model._arrays()):
        np.testing.assert_array_equal(a, b)
