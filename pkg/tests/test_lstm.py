import math

import numpy as np
import pytest

from aoipm import lstm
from aoipm.errors import InsufficientDataError
from aoipm.lstm import (
    LstmModel,
    TrainConfig,
    forecast,
    forward,
    gradient_check,
    load_model,
    make_windows,
    save_model,
    train,
)


def small_model(seed=0, hidden=4, window=5):
    rng = np.random.default_rng(seed)
    return LstmModel(hidden, window, rng)


class TestWindows:
    def test_counts(self):
        X, y = make_windows([1, 2, 3, 4, 5], 3)
        assert X.shape == (2, 3)
        assert y.tolist() == [4.0, 5.0]

    def test_exact_pairs(self):
        X, y = make_windows([1, 2, 3, 4], 2)
        assert X.tolist() == [[1.0, 2.0], [2.0, 3.0]]
        assert y.tolist() == [3.0, 4.0]

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            make_windows([1, 2, 3], 3)


class TestForward:
    def test_zero_parameters_zero_output(self):
        model = small_model()
        model.Wx[:] = 0
        model.Wh[:] = 0
        model.b[:] = 0
        model.w_out[:] = 0
        model.b_out = 0.0
        assert forward(model, [0.3, -1.0, 2.0, 0.0, 5.0]) == 0.0

    def test_deterministic(self):
        a = forward(small_model(3), [0.1, 0.2, 0.3, 0.4, 0.5])
        b = forward(small_model(3), [0.1, 0.2, 0.3, 0.4, 0.5])
        assert a == b

    def test_single_unit_hand_computation(self):
        # 1 hidden unit, 1 step, every weight 0.1, input 0.5: evaluate the
        # gate equations with scalar arithmetic and compare.
        model = small_model(hidden=1, window=1)
        model.Wx[:] = 0.1
        model.Wh[:] = 0.1
        model.b[:] = 0.1
        model.w_out[:] = 0.1
        model.b_out = 0.1

        sig = lambda v: 1.0 / (1.0 + math.exp(-v))
        a = 0.1 * 0.5 + 0.1  # no prior hidden state
        i = f = o = sig(a)
        g = math.tanh(a)
        c = i * g
        h = o * math.tanh(c)
        expected = 0.1 * h + 0.1
        assert forward(model, [0.5]) == pytest.approx(expected, abs=1e-15)

    def test_wrong_window_length(self):
        with pytest.raises(ValueError):
            forward(small_model(), [1.0, 2.0])

    def test_output_bound(self):
        model = small_model(9)
        bound = np.abs(model.w_out).sum() + abs(model.b_out)
        rng = np.random.default_rng(0)
        for _ in range(20):
            y = forward(model, rng.uniform(-100, 100, model.window))
            assert abs(y) <= bound + 1e-12


class TestGradients:
    def test_fresh_model_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        model = small_model(2)
        X = rng.uniform(0, 1, (3, model.window))
        y = rng.uniform(0, 1, 3)
        assert gradient_check(model, X, y) < 1e-4

    def test_corrupted_gradient_detected(self):
        # negating one gradient matrix must blow past the tolerance, proving
        # the finite-difference harness is sensitive, not vacuous
        rng = np.random.default_rng(2)
        model = small_model(2)
        X = rng.uniform(0, 1, (3, model.window))
        y = rng.uniform(0, 1, 3)
        _, grads = lstm._backward_batch(model, X, y)
        flat = model.Wh.reshape(-1)
        j = int(np.argmax(np.abs(grads["Wh"])))
        analytic = -grads["Wh"].reshape(-1)[j]  # deliberately wrong sign
        step = 1e-5
        orig = flat[j]
        flat[j] = orig + step
        lp, _ = lstm._loss_only(model, X, y)
        flat[j] = orig - step
        lm, _ = lstm._loss_only(model, X, y)
        flat[j] = orig
        numeric = (lp - lm) / (2 * step)
        assert lstm._rel_err(analytic, numeric, 1e-8) > 1e-1


CONST_CONFIG = TrainConfig(
    learning_rate=0.05, epochs=300, window=5, seed=1, hidden_size=8, batch_size=16
)
RAMP_CONFIG = TrainConfig(
    learning_rate=0.1, epochs=500, window=10, seed=1, hidden_size=16, batch_size=32
)


class TestTrain:
    def test_constant_series(self):
        model, rmse = train(np.full(80, 0.5), CONST_CONFIG)
        assert rmse <= 1e-3

    def test_loss_non_increasing_on_constant(self):
        losses = []
        train(np.full(80, 0.5), CONST_CONFIG, on_epoch=lambda e, l: losses.append(l))
        assert len(losses) == CONST_CONFIG.epochs
        for a, b in zip(losses[1:], losses[2:]):
            assert b <= a + 1e-9

    def test_linear_ramp(self):
        model, rmse = train(np.linspace(0, 1, 300), RAMP_CONFIG)
        assert rmse <= 0.05

    def test_deterministic_parameters(self):
        m1, r1 = train(np.linspace(0, 1, 100), CONST_CONFIG)
        m2, r2 = train(np.linspace(0, 1, 100), CONST_CONFIG)
        assert r1 == r2
        for (_, a), (_, b) in zip(m1.params(), m2.params()):
            assert np.array_equal(a, b)

    def test_pooled_series(self):
        series = [np.linspace(0, 1, 60), np.linspace(1, 0, 60)]
        model, rmse = train(series, CONST_CONFIG)
        assert np.isfinite(rmse)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            train(np.ones(5), CONST_CONFIG)


class TestForecast:
    def test_stop_on_first_point(self):
        model = small_model()
        result = forecast(model, np.zeros(10), stop=lambda ext: True, horizon_cap=50)
        assert len(result.values) == 1
        assert not result.capped

    def test_never_stops_capped(self):
        model = small_model()
        result = forecast(model, np.zeros(10), stop=lambda ext: False, horizon_cap=37)
        assert len(result.values) == 37
        assert result.capped

    def test_seed_too_short(self):
        model = small_model()
        with pytest.raises(InsufficientDataError):
            forecast(model, [1.0], stop=lambda ext: True)

    def test_closed_loop_feeds_predictions(self):
        model = small_model(4)
        seen = []
        forecast(model, np.zeros(5), stop=lambda ext: seen.append(list(ext)) or len(seen) == 3)
        assert len(seen[0]) == 6 and len(seen[2]) == 8
        assert seen[1][:6] == seen[0]


class TestPersistence:
    def test_round_trip_forecasts_bit_exact(self, tmp_path):
        model, _ = train(np.linspace(0, 1, 100), CONST_CONFIG)
        path = tmp_path / "model.json"
        save_model(model, CONST_CONFIG, path)
        model2, config2 = load_model(path)
        assert config2 == CONST_CONFIG
        window = np.linspace(0.2, 0.4, CONST_CONFIG.window)
        assert forward(model, window) == forward(model2, window)

    def test_reject_foreign_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_model(path)
