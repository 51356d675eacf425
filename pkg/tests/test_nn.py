import numpy as np
import numpy.testing as npt
import pytest

from graphtrack.errors import InvalidInput, TapeReuseError
from graphtrack.nn import (
    AdamState,
    Mlp,
    MlpSpec,
    adam_step,
    load_arrays,
    mse_l2_loss,
    save_arrays,
)

FD_STEP = 1e-5
FD_RTOL = 1e-4


def make_mlp(spec, seed=0):
    return Mlp.create(spec, np.random.default_rng(seed))


def straightline_forward(mlp, x):
    """Independent re-implementation of the forward map, no shared code paths."""
    p = mlp.params
    spec = mlp.spec
    h = np.array(x, dtype=float)
    n_dense = len(spec.hidden_dims) + 1
    for i in range(n_dense):
        h = h @ p[f"W{i}"] + p[f"b{i}"]
        if i < n_dense - 1:
            h[h < 0] = 0.0
    if spec.output_relu:
        h[h < 0] = 0.0
    if spec.use_output_batchnorm:
        h = (h - mlp.bn.running_mean) / np.sqrt(mlp.bn.running_var + mlp.bn.epsilon)
        h = p["gamma"] * h + p["beta"]
    if spec.final_extra_linear is not None:
        h = h @ p["W_ext"] + p["b_ext"]
    return h


def fd_param_grad(loss_fn, arr, idx):
    """Central finite difference of a scalar function along one coordinate."""
    orig = arr[idx]
    arr[idx] = orig + FD_STEP
    up = loss_fn()
    arr[idx] = orig - FD_STEP
    down = loss_fn()
    arr[idx] = orig
    return (up - down) / (2 * FD_STEP)


def check_grads_against_fd(mlp, x, training, n_probes=60, seed=0):
    """Compare analytic parameter/input gradients of sum(out * R) with FD."""
    rng = np.random.default_rng(seed)
    out, tape = mlp.forward(x, training=training)
    weight = rng.standard_normal(out.shape)
    gx, grads = mlp.backward(tape, weight)

    def loss_fn():
        y, _ = mlp.forward(x, training=training)
        return float(np.sum(y * weight))

    checked = 0
    for key in sorted(mlp.params):
        arr = mlp.params[key]
        flat = arr.reshape(-1)
        take = min(max(2, n_probes // len(mlp.params)), flat.size)
        for idx in rng.choice(flat.size, size=take, replace=False):
            numeric = fd_param_grad(loss_fn, flat, idx)
            analytic = grads[key].reshape(-1)[idx]
            assert_fd_close(numeric, analytic, (key, idx))
            checked += 1
    # input gradients too
    xflat = x.reshape(-1)
    for idx in rng.choice(xflat.size, size=min(8, xflat.size), replace=False):
        numeric = fd_param_grad(loss_fn, xflat, idx)
        analytic = gx.reshape(-1)[idx]
        assert_fd_close(numeric, analytic, ("input", idx))
    return checked


def assert_fd_close(numeric, analytic, context):
    # gradients that are structurally zero show up as FD rounding noise
    if abs(numeric) < 1e-8 and abs(analytic) < 1e-8:
        return
    rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic))
    assert rel < FD_RTOL, (context, numeric, analytic, rel)


class TestForward:
    def test_zero_net_outputs_zero(self):
        spec = MlpSpec(3, (5,), 4, use_output_batchnorm=True)
        mlp = make_mlp(spec)
        for key in ("W0", "b0", "W1", "b1"):
            mlp.params[key][...] = 0.0
        x = np.random.default_rng(0).standard_normal((6, 3))
        out, _ = mlp.forward(x, training=False)
        npt.assert_array_equal(out, np.zeros((6, 4)))

    def test_identity_single_layer(self):
        spec = MlpSpec(4, (), 4)
        mlp = make_mlp(spec)
        mlp.params["W0"] = np.eye(4)
        mlp.params["b0"][...] = 0.0
        x = np.random.default_rng(1).standard_normal((5, 4))
        out, _ = mlp.forward(x)
        npt.assert_array_equal(out, x)

    def test_matches_straightline_reimplementation(self):
        rng = np.random.default_rng(2)
        spec = MlpSpec(6, (9, 7), 5, use_output_batchnorm=True, final_extra_linear=3)
        mlp = make_mlp(spec, seed=3)
        mlp.bn.running_mean = rng.standard_normal(5)
        mlp.bn.running_var = rng.uniform(0.5, 2.0, 5)
        x = rng.standard_normal((11, 6))
        out, _ = mlp.forward(x, training=False)
        npt.assert_allclose(out, straightline_forward(mlp, x), atol=1e-10)

    def test_shape_mismatch_rejected(self):
        mlp = make_mlp(MlpSpec(3, (4,), 2))
        with pytest.raises(InvalidInput):
            mlp.forward(np.zeros((5, 7)))

    def test_bn_training_needs_two_rows(self):
        mlp = make_mlp(MlpSpec(3, (4,), 2, use_output_batchnorm=True))
        with pytest.raises(InvalidInput):
            mlp.forward(np.zeros((1, 3)), training=True)

    def test_relu_idempotent(self):
        spec = MlpSpec(4, (4,), 4)
        mlp = make_mlp(spec)
        mlp.params["W0"] = np.eye(4)
        mlp.params["W1"] = np.eye(4)
        mlp.params["b0"][...] = 0.0
        mlp.params["b1"][...] = 0.0
        x = np.random.default_rng(3).standard_normal((6, 4))
        once, _ = mlp.forward(x)
        twice, _ = mlp.forward(once)
        npt.assert_array_equal(once, twice)


class TestBatchNorm:
    def test_training_normalizes_batch(self):
        # input variance far above epsilon so the eps bias in 1/sqrt(var+eps)
        # stays below the 1e-8 assertion
        spec = MlpSpec(5, (), 5, use_output_batchnorm=True)
        mlp = make_mlp(spec, seed=4)
        mlp.params["W0"] = np.eye(5) * 1e3
        x = np.random.default_rng(5).standard_normal((64, 5)) + 1.5
        out, _ = mlp.forward(x, training=True)  # gamma=1, beta=0 at init
        npt.assert_allclose(out.mean(axis=0), 0.0, atol=1e-8)
        npt.assert_allclose(out.var(axis=0), 1.0, atol=1e-8)

    def test_inference_does_not_mutate_running_stats(self):
        spec = MlpSpec(3, (4,), 2, use_output_batchnorm=True)
        mlp = make_mlp(spec, seed=6)
        x = np.random.default_rng(7).standard_normal((10, 3))
        mlp.forward(x, training=True)
        mean_before = mlp.bn.running_mean.copy()
        var_before = mlp.bn.running_var.copy()
        a, _ = mlp.forward(x, training=False)
        b, _ = mlp.forward(x, training=False)
        npt.assert_array_equal(a, b)
        npt.assert_array_equal(mlp.bn.running_mean, mean_before)
        npt.assert_array_equal(mlp.bn.running_var, var_before)

    def test_training_updates_running_stats(self):
        spec = MlpSpec(3, (), 3, use_output_batchnorm=True)
        mlp = make_mlp(spec, seed=8)
        before = mlp.bn.running_mean.copy()
        mlp.forward(np.random.default_rng(9).standard_normal((32, 3)) + 5.0, training=True)
        assert not np.array_equal(mlp.bn.running_mean, before)


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        mlp = make_mlp(MlpSpec(3, (4,), 2, use_output_batchnorm=True), seed=10)
        x = np.random.default_rng(11).standard_normal((6, 3))
        out, tape = mlp.forward(x, training=True)
        gx, grads = mlp.backward(tape, np.zeros_like(out))
        npt.assert_array_equal(gx, np.zeros_like(x))
        for g in grads.values():
            npt.assert_array_equal(g, np.zeros_like(g))

    def test_linear_layer_closed_form(self):
        mlp = make_mlp(MlpSpec(3, (), 2), seed=12)
        rng = np.random.default_rng(13)
        x = rng.standard_normal((7, 3))
        upstream = rng.standard_normal((7, 2))
        _, tape = mlp.forward(x)
        gx, grads = mlp.backward(tape, upstream)
        npt.assert_allclose(grads["W0"], x.T @ upstream, atol=1e-12)
        npt.assert_allclose(grads["b0"], upstream.sum(axis=0), atol=1e-12)
        npt.assert_allclose(gx, upstream @ mlp.params["W0"].T, atol=1e-12)

    def test_tape_reuse_rejected(self):
        mlp = make_mlp(MlpSpec(3, (4,), 2), seed=14)
        out, tape = mlp.forward(np.zeros((2, 3)))
        mlp.backward(tape, np.zeros_like(out))
        with pytest.raises(TapeReuseError):
            mlp.backward(tape, np.zeros_like(out))

    def test_fd_dense_relu_net(self):
        mlp = make_mlp(MlpSpec(4, (6, 5), 3), seed=15)
        x = np.random.default_rng(16).standard_normal((8, 4))
        assert check_grads_against_fd(mlp, x, training=False) > 0

    def test_fd_bn_training_mode(self):
        mlp = make_mlp(MlpSpec(4, (6,), 3, use_output_batchnorm=True), seed=17)
        x = np.random.default_rng(18).standard_normal((9, 4))
        check_grads_against_fd(mlp, x, training=True)

    def test_fd_bn_inference_mode(self):
        mlp = make_mlp(MlpSpec(4, (6,), 3, use_output_batchnorm=True), seed=19)
        mlp.bn.running_mean = np.random.default_rng(20).standard_normal(3)
        mlp.bn.running_var = np.random.default_rng(21).uniform(0.5, 2.0, 3)
        x = np.random.default_rng(22).standard_normal((9, 4))
        check_grads_against_fd(mlp, x, training=False)

    def test_fd_decoder_shape_with_trailing_linear(self):
        spec = MlpSpec(5, (6, 4), 2, use_output_batchnorm=True, final_extra_linear=2)
        mlp = make_mlp(spec, seed=23)
        x = np.random.default_rng(24).standard_normal((7, 5))
        check_grads_against_fd(mlp, x, training=True)

    def test_fd_output_relu_variant(self):
        spec = MlpSpec(4, (6,), 3, use_output_batchnorm=True, output_relu=True)
        mlp = make_mlp(spec, seed=25)
        x = np.random.default_rng(26).standard_normal((9, 4))
        check_grads_against_fd(mlp, x, training=True)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        state = AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0, -2.0])}
        before = params["w"].copy()
        adam_step(state, params, {"w": np.zeros(2)})
        npt.assert_array_equal(params["w"], before)

    def test_first_step_magnitude(self):
        # hand-evaluated recurrences: m=0.1, v=1e-3; bias correction makes
        # m_hat=1, v_hat=1, so the step is -lr / (1 + eps)
        state = AdamState(learning_rate=0.1)
        params = {"w": np.array([0.0])}
        adam_step(state, params, {"w": np.array([1.0])})
        expected = -0.1 * 1.0 / (1.0 + state.epsilon)
        npt.assert_allclose(params["w"][0], expected, rtol=1e-12)

    def test_deterministic_trajectories(self):
        def run():
            rng = np.random.default_rng(27)
            state = AdamState(learning_rate=0.01)
            params = {"w": rng.standard_normal(5)}
            for _ in range(20):
                adam_step(state, params, {"w": rng.standard_normal(5)})
            return params["w"]

        npt.assert_array_equal(run(), run())

    def test_scale_invariance_limit(self):
        g = np.array([0.5, -1.5, 2.0])

        def trajectory(scale):
            state = AdamState(learning_rate=0.01)
            params = {"w": np.zeros(3)}
            steps = []
            for _ in range(100):
                before = params["w"].copy()
                adam_step(state, params, {"w": scale * g})
                steps.append(params["w"] - before)
            return np.array(steps)

        a = trajectory(1.0)
        b = trajectory(7.0)
        assert np.all(np.sign(a[-1]) == np.sign(b[-1]))
        npt.assert_allclose(a[-1] / b[-1], 1.0, atol=1e-3)


class TestLoss:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(28)
        target = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        result = mse_l2_loss(target.copy(), target)
        assert result.total == 0.0

    def test_regularizer_only(self):
        target = np.zeros((2, 2), dtype=complex)
        weights = [np.array([[2.0]])]  # ||w||^2 = 4
        result = mse_l2_loss(target.copy(), target, weights=weights, kappa=0.1)
        npt.assert_allclose(result.total, 0.4, rtol=1e-15)
        npt.assert_allclose(result.weight_grads[0], [[0.4]], rtol=1e-15)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(29)
        pred = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
        target = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
        weights = [rng.standard_normal((3, 2))]
        kappa = 0.05
        result = mse_l2_loss(pred, target, weights=weights, kappa=kappa)
        acc = 0.0
        for m in range(5):
            for k in range(4):
                d = pred[m, k] - target[m, k]
                acc += d.real ** 2 + d.imag ** 2
        expected = acc / (4 * 5) + kappa * sum(
            w ** 2 for w in weights[0].reshape(-1)
        )
        assert abs(result.total - expected) < 1e-12

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(30)
        pred = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        target = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        result = mse_l2_loss(pred, target)

        def total(p):
            return mse_l2_loss(p, target).total

        for m in range(3):
            for k in range(4):
                for part, grad in ((1.0, result.pred_grad[m, k].real),
                                   (1.0j, result.pred_grad[m, k].imag)):
                    bump = np.zeros_like(pred)
                    bump[m, k] = part * FD_STEP
                    numeric = (total(pred + bump) - total(pred - bump)) / (2 * FD_STEP)
                    assert abs(numeric - grad) < 1e-7

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            mse_l2_loss(np.zeros((2, 2), complex), np.zeros((2, 3), complex))


class TestCheckpointContainer:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(31)
        arrays = {
            "enc/W0": rng.standard_normal((4, 5)),
            "enc/bn_mean": rng.standard_normal(5),
            "adam/m/enc/W0": rng.standard_normal((4, 5)),
        }
        manifest = {"kind": "test", "nested": {"a": [1, 2, 3]}}
        path = tmp_path / "ckpt.npz"
        save_arrays(path, arrays, manifest)
        loaded, man = load_arrays(path)
        assert man == manifest
        assert set(loaded) == set(arrays)
        for key in arrays:
            assert loaded[key].tobytes() == arrays[key].tobytes()
