import math

import numpy as np
import pytest

from gradcheck import check_op, finite_difference, max_rel_err
from fmim import engine
from fmim.engine import Adam, AdamState, LSTMParams, Tensor, adam_step
from fmim.errors import ShapeMismatch

TOL = 1e-4


def rand_lstm_params(rng, feat=3, hidden=4):
    return {
        "w_x": rng.normal(size=(4 * hidden, feat)) * 0.5,
        "w_h": rng.normal(size=(4 * hidden, hidden)) * 0.5,
        "b": rng.normal(size=(4 * hidden,)) * 0.5,
    }


class TestConv3d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 4, 4, 2))
        kernel = np.zeros((1, 1, 1, 2, 2))
        kernel[0, 0, 0] = np.eye(2)
        out = engine.conv3d(Tensor(x), Tensor(kernel))
        assert np.allclose(out.data, x, atol=1e-15)

    def test_all_ones_sums_to_27(self):
        out = engine.conv3d(Tensor(np.ones((3, 3, 3, 1))), Tensor(np.ones((3, 3, 3, 1, 1))))
        assert out.data.shape == (1, 1, 1, 1)
        assert out.data.reshape(()) == 27.0

    def test_channel_mismatch(self):
        with pytest.raises(ShapeMismatch):
            engine.conv3d(Tensor(np.ones((3, 3, 3, 2))), Tensor(np.ones((2, 2, 2, 3, 1))))

    def test_kernel_too_large(self):
        with pytest.raises(ShapeMismatch):
            engine.conv3d(Tensor(np.ones((2, 2, 2, 1))), Tensor(np.ones((3, 3, 3, 1, 1))))

    @pytest.mark.parametrize("seed", range(3))
    def test_gradcheck(self, seed):
        rng = np.random.default_rng(seed)
        arrays = {"x": rng.normal(size=(2, 4, 4, 2)), "k": rng.normal(size=(2, 2, 2, 2, 3))}
        err = check_op(lambda t: engine.mse_loss(
            engine.conv3d(t["x"], t["k"], stride=(1, 2, 1), padding=1),
            np.zeros((3, 3, 5, 3))), arrays)
        assert err < TOL


class TestPool3d:
    def test_constant_input_both_modes(self):
        x = np.full((4, 4, 4, 2), 3.5)
        for mode in ("max", "average"):
            out = engine.pool3d(Tensor(x), (2, 2, 2), mode=mode)
            assert np.all(out.data == 3.5)

    def test_max_of_known_window(self):
        x = np.array([1.0, 5.0, 3.0, 2.0]).reshape(1, 2, 2, 1)
        out = engine.pool3d(Tensor(x), (1, 2, 2), mode="max")
        assert out.data.reshape(()) == 5.0

    def test_average_serves_patch_pooling(self):
        x = np.array([1.0, 5.0, 3.0, 2.0]).reshape(1, 2, 2, 1)
        out = engine.pool3d(Tensor(x), (1, 2, 2), mode="average")
        assert out.data.reshape(()) == pytest.approx(2.75)

    @pytest.mark.parametrize("mode", ["max", "average"])
    @pytest.mark.parametrize("seed", range(3))
    def test_gradcheck(self, mode, seed):
        rng = np.random.default_rng(seed)
        # well-separated values keep the finite-difference oracle away
        # from argmax ties, where it stops being a valid reference
        arrays = {"x": rng.permutation(128).reshape(4, 4, 4, 2) * 0.1}
        err = check_op(lambda t: engine.mse_loss(
            engine.pool3d(t["x"], (2, 2, 2), mode=mode), np.zeros((2, 2, 2, 2))), arrays)
        assert err < TOL

    def test_overlapping_stride_gradcheck(self):
        rng = np.random.default_rng(9)
        arrays = {"x": rng.permutation(48).reshape(3, 4, 4, 1) * 0.1}
        err = check_op(lambda t: engine.mse_loss(
            engine.pool3d(t["x"], (2, 2, 2), stride=(1, 1, 1), mode="max"),
            np.zeros((2, 3, 3, 1))), arrays)
        assert err < TOL


class TestPad3d:
    def test_zero_amounts_identity(self):
        x = np.arange(8.0).reshape(2, 2, 2, 1)
        assert np.array_equal(engine.pad3d(Tensor(x), 0).data, x)

    def test_centered_expansion(self):
        x = np.ones((2, 2, 2, 1))
        out = engine.pad3d(Tensor(x), 1).data
        assert out.shape == (4, 4, 4, 1)
        assert out.sum() == 8.0
        assert np.array_equal(out[1:3, 1:3, 1:3], x)

    def test_crop_inverts_pad(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 3, 4, 2))
        padded = engine.pad3d(Tensor(x), (1, 2, 0))
        assert np.array_equal(engine.crop3d(padded, (1, 2, 0)).data, x)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradcheck(self, seed):
        rng = np.random.default_rng(seed)
        arrays = {"x": rng.normal(size=(2, 3, 3, 2))}
        err = check_op(lambda t: engine.mse_loss(
            engine.pad3d(t["x"], (1, 0, 1)), np.zeros((4, 3, 5, 2))), arrays)
        assert err < TOL


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        out = engine.dense(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        assert np.array_equal(out.data, x)

    def test_hand_product(self):
        out = engine.dense(Tensor(np.array([1.0, 1.0])),
                           Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])),
                           Tensor(np.zeros(2)))
        assert np.array_equal(out.data, [3.0, 7.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            engine.dense(Tensor(np.ones(3)), Tensor(np.ones((2, 4))))

    @pytest.mark.parametrize("seed", range(3))
    def test_gradcheck(self, seed):
        rng = np.random.default_rng(seed)
        arrays = {"x": rng.normal(size=5), "w": rng.normal(size=(3, 5)), "b": rng.normal(size=3)}
        err = check_op(lambda t: engine.mse_loss(
            engine.dense(t["x"], t["w"], t["b"]), np.zeros(3)), arrays)
        assert err < TOL


class TestActivations:
    def test_relu_nonnegative_sigmoid_tanh_ranges(self):
        rng = np.random.default_rng(2)
        # magnitudes below the float64 saturation points of both curves
        x = rng.uniform(-15, 15, size=1000)
        assert engine.relu(Tensor(x)).data.min() >= 0.0
        s = engine.sigmoid(Tensor(x)).data
        assert np.all((s > 0.0) & (s < 1.0))
        t = engine.tanh(Tensor(x)).data
        assert np.all((t > -1.0) & (t < 1.0))

    def test_clip_passes_interior_gradient(self):
        x = Tensor(np.array([-2.0, 0.5, 2.0]), requires_grad=True)
        out = engine.clip(x, -1.0, 1.0)
        engine.mse_loss(out, np.zeros(3)).backward()
        assert np.array_equal(out.data, [-1.0, 0.5, 1.0])
        assert x.grad[0] == 0.0 and x.grad[2] == 0.0 and x.grad[1] != 0.0

    @pytest.mark.parametrize("op", [engine.relu, engine.sigmoid, engine.tanh])
    def test_gradcheck(self, op):
        rng = np.random.default_rng(4)
        x = rng.normal(size=20)
        x = np.where(np.abs(x) < 0.05, 0.2, x)  # keep clear of the relu kink
        err = check_op(lambda t: engine.mse_loss(op(t["x"]), np.zeros(20)), {"x": x})
        assert err < TOL


class TestLSTM:
    def test_zero_everything_gives_zero_hidden(self):
        params = LSTMParams(Tensor(np.zeros((16, 3))), Tensor(np.zeros((16, 4))),
                            Tensor(np.zeros(16)))
        h, c = engine.lstm_cell(Tensor(np.zeros(3)),
                                (Tensor(np.zeros(4)), Tensor(np.zeros(4))), params)
        assert np.array_equal(h.data, np.zeros(4))

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(5)
        raw = rand_lstm_params(rng)
        params = LSTMParams(*(Tensor(raw[k] * 10) for k in ("w_x", "w_h", "b")))
        h = engine.lstm_sequence([Tensor(rng.normal(size=3) * 50) for _ in range(4)], params)
        assert np.all(np.abs(h.data) <= 1.0)

    def test_state_shape_mismatch(self):
        params = LSTMParams(Tensor(np.zeros((16, 3))), Tensor(np.zeros((16, 4))),
                            Tensor(np.zeros(16)))
        with pytest.raises(ShapeMismatch):
            engine.lstm_cell(Tensor(np.zeros(3)),
                             (Tensor(np.zeros(5)), Tensor(np.zeros(5))), params)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradcheck_three_steps(self, seed):
        rng = np.random.default_rng(seed)
        raw = rand_lstm_params(rng)
        xs = rng.normal(size=(3, 3))

        def build(t):
            params = LSTMParams(t["w_x"], t["w_h"], t["b"])
            h = engine.lstm_sequence([Tensor(v) for v in xs], params)
            return engine.mse_loss(h, np.zeros(4))

        assert check_op(build, raw) < TOL


class TestDropout:
    def test_eval_mode_identity(self):
        x = np.arange(10.0)
        out = engine.dropout(Tensor(x), 0.5, mode="eval")
        assert np.array_equal(out.data, x)

    def test_rate_zero_identity_both_modes(self):
        x = np.arange(10.0)
        for mode in ("train", "eval"):
            assert np.array_equal(engine.dropout(Tensor(x), 0.0, mode=mode, rng=1).data, x)

    def test_survivor_fraction(self):
        out = engine.dropout(Tensor(np.ones(1_000_000)), 0.5, mode="train", rng=123)
        fraction = np.count_nonzero(out.data) / 1_000_000
        assert abs(fraction - 0.5) <= 0.002

    def test_deterministic_under_seed(self):
        x = np.ones(1000)
        a = engine.dropout(Tensor(x), 0.5, mode="train", rng=7).data
        b = engine.dropout(Tensor(x), 0.5, mode="train", rng=7).data
        assert np.array_equal(a, b)

    def test_gradcheck_fixed_mask(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=30)
        err = check_op(lambda t: engine.mse_loss(
            engine.dropout(t["x"], 0.5, mode="train", rng=11), np.zeros(30)), {"x": x})
        assert err < TOL


class TestMseLoss:
    def test_equal_inputs(self):
        assert engine.mse_loss(Tensor(np.ones(5)), np.ones(5)).item() == 0.0

    def test_constant_offset(self):
        assert engine.mse_loss(Tensor(np.full(8, 2.5)), np.full(8, 2.0)).item() == pytest.approx(0.25)

    def test_gradient_formula(self):
        rng = np.random.default_rng(8)
        pred = Tensor(rng.normal(size=6), requires_grad=True)
        target = rng.normal(size=6)
        loss = engine.mse_loss(pred, target)
        loss.backward()
        assert np.allclose(pred.grad, 2 * (pred.data - target) / 6, atol=1e-15)

    def test_gradcheck_tight(self):
        rng = np.random.default_rng(10)
        target = rng.normal(size=12)
        arrays = {"p": rng.normal(size=12)}
        tensors = {"p": Tensor(arrays["p"], requires_grad=True)}
        engine.mse_loss(tensors["p"], target).backward()
        numeric = finite_difference(
            lambda: float(engine.mse_loss(Tensor(arrays["p"]), target).data), arrays["p"])
        assert max_rel_err(tensors["p"].grad, numeric) < 1e-6


def textbook_adam_on_square(lr=0.1, steps=200):
    """Independent scalar-descent oracle: plain Adam equations on f(x)=x^2."""
    x, m, v = 1.0, 0.0, 0.0
    traj = [abs(x)]
    for t in range(1, steps + 1):
        g = 2.0 * x
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x -= lr * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        traj.append(abs(x))
    return traj


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        state = AdamState.for_params([p])
        adam_step([p], [np.zeros(2)], state, lr=0.1)
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_scalar_descent_matches_oracle(self):
        oracle = textbook_adam_on_square()
        p = Tensor(np.array([1.0]), requires_grad=True)
        state = AdamState.for_params([p])
        traj = [abs(float(p.data[0]))]
        for _ in range(200):
            adam_step([p], [2.0 * p.data], state, lr=0.1)
            traj.append(abs(float(p.data[0])))
        assert np.allclose(traj, oracle, atol=1e-12)
        first_below = next(k for k, v in enumerate(traj) if v < 1e-2)
        assert first_below <= 200
        # monotone descent from the start until the threshold crossing
        assert all(traj[k + 1] <= traj[k] + 1e-15 for k in range(first_below))
        assert traj[-1] < 1e-2

    def test_two_runs_identical(self):
        rng = np.random.default_rng(12)
        grads = [rng.normal(size=4) for _ in range(20)]

        def run():
            p = Tensor(np.ones(4), requires_grad=True)
            state = AdamState.for_params([p])
            for g in grads:
                adam_step([p], [g], state, lr=0.01)
            return p.data.copy()

        assert np.array_equal(run(), run())

    def test_wrapper_matches_functional(self):
        p1 = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        p2 = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        opt = Adam([p1], lr=0.05)
        state = AdamState.for_params([p2])
        for k in range(5):
            g = np.array([0.3, -0.7]) * (k + 1)
            p1.grad = g.copy()
            opt.step()
            adam_step([p2], [g], state, lr=0.05)
        assert np.array_equal(p1.data, p2.data)


class TestDeterminism:
    def test_forward_backward_bit_identical(self):
        def run():
            rng = np.random.default_rng(99)
            x = Tensor(rng.normal(size=(2, 4, 4, 1)))
            k = Tensor(rng.normal(size=(2, 2, 2, 1, 2)), requires_grad=True)
            out = engine.pool3d(engine.conv3d_relu(x, k, padding=1), (1, 2, 2))
            loss = engine.mse_loss(out, np.zeros_like(out.data))
            loss.backward()
            return loss.item(), k.grad.copy()

        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert np.array_equal(g1, g2)


class TestGraphPlumbing:
    def test_mean_axes_gradcheck(self):
        rng = np.random.default_rng(14)
        arrays = {"x": rng.normal(size=(2, 3, 2, 4))}
        err = check_op(lambda t: engine.mse_loss(
            engine.mean_axes(t["x"], (0, 1, 2)), np.zeros(4)), arrays)
        assert err < TOL

    def test_slice_and_affine_gradcheck(self):
        rng = np.random.default_rng(15)
        arrays = {"x": rng.normal(size=10)}
        err = check_op(lambda t: engine.mse_loss(
            engine.affine(engine.slice_vec(t["x"], 2, 7), 3.0, -1.0), np.zeros(5)), arrays)
        assert err < TOL

    def test_backward_needs_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeMismatch):
            engine.relu(x).backward()
