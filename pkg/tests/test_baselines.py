import numpy as np
import numpy.testing as npt
import pytest

from graphtrack.baselines import FnnModel, fnn_predict, ls_baseline_predict
from graphtrack.channel import FrameLayout, build_ls_series, simulate_frame, SystemConfig
from graphtrack.errors import InvalidInput
from graphtrack.graphs import GraphWindow, build_graph, permute_graph


def raw_pair(rng, n_vertices=8, window_len=6):
    def one(t):
        h = rng.standard_normal((n_vertices, window_len)) + 1j * rng.standard_normal(
            (n_vertices, window_len)
        )
        return build_graph(GraphWindow(h), t)

    return one(20), one(10)


class TestLsBaseline:
    def setup_method(self):
        cfg = SystemConfig(n_antennas=4, n_paths=3, seed=0)
        frame = simulate_frame(cfg, FrameLayout(1, 4, 5), np.random.default_rng(0))
        self.series = build_ls_series(frame.received, frame.stream)

    def test_pilot_index_is_fresh(self):
        npt.assert_array_equal(ls_baseline_predict(self.series, 5), self.series.estimates[5])

    def test_data_index_is_held(self):
        npt.assert_array_equal(ls_baseline_predict(self.series, 8), self.series.estimates[5])

    def test_out_of_range_rejected(self):
        with pytest.raises(IndexError):
            ls_baseline_predict(self.series, 20)
        with pytest.raises(IndexError):
            ls_baseline_predict(self.series, -1)


class TestFnnModel:
    def test_zero_net_zero_prediction(self):
        model = FnnModel.create(6, seed=0)
        for key in model.mlp.params:
            model.mlp.params[key][...] = 0.0
        g_now, g_past = raw_pair(np.random.default_rng(0), n_vertices=6)
        pred = fnn_predict(model, g_now, g_past)
        npt.assert_array_equal(pred, np.zeros(6, dtype=complex))

    def test_output_length(self):
        model = FnnModel.create(8, seed=1)
        g_now, g_past = raw_pair(np.random.default_rng(1), n_vertices=8)
        assert fnn_predict(model, g_now, g_past).shape == (8,)

    def test_input_layout_antenna_major(self):
        # prediction must react to exactly the flattened feature that moved
        model = FnnModel.create(4, seed=2)
        g_now, g_past = raw_pair(np.random.default_rng(2), n_vertices=4)
        from graphtrack.graphs import concat_graphs

        combined = concat_graphs(g_now, g_past)
        x = combined.vertices.reshape(1, -1)
        direct, _ = model.mlp.forward(x)
        pred, _ = model.forward_batch(combined.vertices[None])
        npt.assert_array_equal(pred[0].real, direct[0, :4])
        npt.assert_array_equal(pred[0].imag, direct[0, 4:])

    def test_wrong_antenna_count_rejected(self):
        model = FnnModel.create(4, seed=3)
        g_now, g_past = raw_pair(np.random.default_rng(3), n_vertices=6)
        with pytest.raises(InvalidInput):
            fnn_predict(model, g_now, g_past)

    def test_gradients_match_fd(self):
        rng = np.random.default_rng(4)
        model = FnnModel.create(3, seed=4, hidden=(6, 5))
        g_now, g_past = raw_pair(rng, n_vertices=3)
        from graphtrack.graphs import concat_graphs
        from graphtrack.nn import mse_l2_loss

        combined = [concat_graphs(*raw_pair(rng, n_vertices=3)) for _ in range(4)]
        vertices = np.stack([g.vertices for g in combined])
        targets = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))

        def total():
            pred, _ = model.forward_batch(vertices, training=True)
            return mse_l2_loss(pred, targets, model.weight_arrays(), 0.01).total

        pred, ctx = model.forward_batch(vertices, training=True)
        loss = mse_l2_loss(pred, targets, model.weight_arrays(), 0.01)
        grads = model.backward_batch(ctx, loss.pred_grad)
        for name, wg in zip(model.weight_names(), loss.weight_grads):
            grads[name] = grads[name] + wg

        params = model.named_params()
        step = 1e-5
        for name in sorted(params):
            flat = params[name].reshape(-1)
            idx = rng.integers(flat.size)
            orig = flat[idx]
            flat[idx] = orig + step
            up = total()
            flat[idx] = orig - step
            down = total()
            flat[idx] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].reshape(-1)[idx]
            if abs(numeric) < 1e-8 and abs(analytic) < 1e-8:
                continue
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic))
            assert rel < 1e-4, (name, numeric, analytic)

    def test_not_permutation_equivariant(self):
        # contrast with the graph model: one concrete instance suffices
        rng = np.random.default_rng(5)
        model = FnnModel.create(6, seed=6)
        g_now, g_past = raw_pair(rng, n_vertices=6)
        base = fnn_predict(model, g_now, g_past)
        perm = np.array([1, 0, 3, 2, 5, 4])
        permuted = fnn_predict(model, permute_graph(g_now, perm), permute_graph(g_past, perm))
        assert np.max(np.abs(permuted - base[perm])) > 1e-6

    def test_checkpoint_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        model = FnnModel.create(5, seed=7, hidden=(8, 6))
        g_now, g_past = raw_pair(rng, n_vertices=5)
        path = tmp_path / "fnn.npz"
        model.save(path)
        loaded = FnnModel.load(path)
        npt.assert_array_equal(fnn_predict(model, g_now, g_past),
                               fnn_predict(loaded, g_now, g_past))
