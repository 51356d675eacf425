"""Reference estimators: the raw LS hold-extension and a fully connected
tracker fed the same current + lagged estimate features as the graph model.
"""

import numpy as np

from .errors import InvalidInput
from .channel import LsSeries
from .graphs import ChannelGraph, concat_graphs
from .nn import Mlp, MlpSpec, load_arrays, save_arrays

FNN_HIDDEN = (64, 256, 128, 64)


def ls_baseline_predict(ls_series: LsSeries, n: int) -> np.ndarray:
    """The no-learning baseline: the hold-extended LS estimate at index n."""
    if not 0 <= n < ls_series.estimates.shape[0]:
        raise IndexError(f"time index {n} outside series of length {ls_series.estimates.shape[0]}")
    return ls_series.estimates[n]


class FnnModel:
    """Fully connected tracker over flattened vertex features.

    Input is the 4*Nr vector of [Re now, Im now, Re lagged, Im lagged]
    features in antenna order; output is 2*Nr laid out as the block of all
    real parts followed by the block of all imaginary parts.
    """

    def __init__(self, n_antennas: int, mlp: Mlp):
        self.n_antennas = n_antennas
        self.mlp = mlp

    @classmethod
    def create(cls, n_antennas: int, seed: int = 0, hidden=FNN_HIDDEN,
               use_output_batchnorm: bool = False, bn_momentum: float = 0.99,
               bn_epsilon: float = 1e-5) -> "FnnModel":
        spec = MlpSpec(4 * n_antennas, tuple(hidden), 2 * n_antennas,
                       use_output_batchnorm=use_output_batchnorm)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        return cls(n_antennas, Mlp.create(spec, rng, bn_momentum, bn_epsilon))

    def named_params(self) -> dict:
        return {f"fnn/{key}": arr for key, arr in self.mlp.params.items()}

    def weight_arrays(self):
        return [self.mlp.params[k] for k in self.mlp.weight_keys()]

    def weight_names(self):
        return [f"fnn/{k}" for k in self.mlp.weight_keys()]

    def snapshot(self) -> dict:
        state = {"params": {k: v.copy() for k, v in self.mlp.params.items()}}
        if self.mlp.bn is not None:
            state["bn"] = (self.mlp.bn.running_mean.copy(), self.mlp.bn.running_var.copy())
        return state

    def restore(self, state: dict) -> None:
        for k, v in state["params"].items():
            self.mlp.params[k] = v.copy()
        if self.mlp.bn is not None:
            mean, var = state["bn"]
            self.mlp.bn.running_mean = mean.copy()
            self.mlp.bn.running_var = var.copy()

    def forward_batch(self, vertices, edges=None, src=None, dst=None, training=False):
        """vertices: (B, Nr, 4). Edge features are ignored by this model."""
        batch, n_vertices, feat = vertices.shape
        if n_vertices != self.n_antennas or feat != 4:
            raise InvalidInput(
                f"expected vertices of shape (B, {self.n_antennas}, 4), got {vertices.shape}"
            )
        x = vertices.reshape(batch, 4 * n_vertices)
        y, tape = self.mlp.forward(x, training)
        pred = y[:, :n_vertices] + 1j * y[:, n_vertices:]
        return pred, {"tape": tape}

    def backward_batch(self, ctx, pred_grad):
        g = np.hstack([pred_grad.real, pred_grad.imag])
        _, grads = self.mlp.backward(ctx["tape"], g)
        return {f"fnn/{key}": val for key, val in grads.items()}

    def predict(self, g_now: ChannelGraph, g_past: ChannelGraph) -> np.ndarray:
        combined = concat_graphs(g_now, g_past)
        pred, _ = self.forward_batch(combined.vertices[None, :, :])
        return pred[0]

    def save(self, path, extra_manifest=None, optimizer=None) -> None:
        arrays = dict(self.named_params())
        if self.mlp.bn is not None:
            arrays["fnn/bn_mean"] = self.mlp.bn.running_mean
            arrays["fnn/bn_var"] = self.mlp.bn.running_var
        if optimizer is not None:
            for key, val in optimizer.first_moment.items():
                arrays[f"adam/m/{key}"] = val
            for key, val in optimizer.second_moment.items():
                arrays[f"adam/v/{key}"] = val
        manifest = {
            "kind": "fnn",
            "n_antennas": self.n_antennas,
            "hidden": list(self.mlp.spec.hidden_dims),
            "use_output_batchnorm": self.mlp.spec.use_output_batchnorm,
        }
        if extra_manifest:
            manifest.update(extra_manifest)
        save_arrays(path, arrays, manifest)

    @classmethod
    def load(cls, path) -> "FnnModel":
        arrays, manifest = load_arrays(path)
        if manifest.get("kind") != "fnn":
            raise InvalidInput(f"checkpoint kind {manifest.get('kind')!r} is not 'fnn'")
        model = cls.create(manifest["n_antennas"], seed=0,
                           hidden=tuple(manifest["hidden"]),
                           use_output_batchnorm=manifest["use_output_batchnorm"])
        for key in model.mlp.params:
            model.mlp.params[key] = arrays[f"fnn/{key}"].copy()
        if model.mlp.bn is not None:
            model.mlp.bn.running_mean = arrays["fnn/bn_mean"].copy()
            model.mlp.bn.running_var = arrays["fnn/bn_var"].copy()
        return model


def fnn_predict(model: FnnModel, g_now: ChannelGraph, g_past: ChannelGraph) -> np.ndarray:
    """Channel prediction from the raw graph pair (functional form)."""
    return model.predict(g_now, g_past)
