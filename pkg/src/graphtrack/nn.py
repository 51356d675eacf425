"""Minimal dense-network toolkit: MLPs with ReLU hiddens, an optional
batch-normalized output layer, exact reverse-mode gradients over a
one-shot tape, the ADAM optimizer, and the regularized tracking loss.

All arithmetic is 64-bit. Batches are row-major (batch, features).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, TapeReuseError


@dataclass(frozen=True)
class MlpSpec:
    """Shape of one MLP.

    hidden_dims are dense+ReLU layers; the output layer is dense and
    linear, normalized when use_output_batchnorm is set (after an optional
    ReLU when output_relu is set). final_extra_linear, when given, appends
    a trailing dense layer of that width with no activation.
    """

    input_dim: int
    hidden_dims: tuple
    output_dim: int
    use_output_batchnorm: bool = False
    output_relu: bool = False
    final_extra_linear: int | None = None

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(d < 1 for d in dims):
            raise InvalidInput("all layer dims must be >= 1")
        if self.final_extra_linear is not None and self.final_extra_linear < 1:
            raise InvalidInput("final_extra_linear must be >= 1")

    @property
    def final_dim(self) -> int:
        return self.final_extra_linear if self.final_extra_linear is not None else self.output_dim


@dataclass
class BatchNormState:
    """Per-channel running statistics for one batch-normalized layer."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    epsilon: float = 1e-5

    @classmethod
    def create(cls, n_channels: int, momentum: float = 0.99, epsilon: float = 1e-5):
        return cls(
            running_mean=np.zeros(n_channels),
            running_var=np.ones(n_channels),
            momentum=momentum,
            epsilon=epsilon,
        )


class Tape:
    """Recorded forward pass; consumed exactly once by backward."""

    def __init__(self, records, training: bool):
        self.records = records
        self.training = training
        self.consumed = False


class Mlp:
    """One MLP with named parameters and (optionally) a BN output stage.

    Parameter keys: W0/b0 ... per dense layer in order, gamma/beta for the
    BN stage, W_ext/b_ext for the trailing linear layer.
    """

    def __init__(self, spec: MlpSpec, params: dict, bn: BatchNormState | None):
        self.spec = spec
        self.params = params
        self.bn = bn

    @classmethod
    def create(cls, spec: MlpSpec, rng: np.random.Generator,
               bn_momentum: float = 0.99, bn_epsilon: float = 1e-5) -> "Mlp":
        """He-initialized hidden layers, fan-average uniform linear layers."""
        params = {}
        widths = [spec.input_dim, *spec.hidden_dims, spec.output_dim]
        n_dense = len(widths) - 1
        for i in range(n_dense):
            fan_in, fan_out = widths[i], widths[i + 1]
            if i < n_dense - 1:
                w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, (fan_in, fan_out))
            params[f"W{i}"] = w
            params[f"b{i}"] = np.zeros(fan_out)
        bn = None
        if spec.use_output_batchnorm:
            params["gamma"] = np.ones(spec.output_dim)
            params["beta"] = np.zeros(spec.output_dim)
            bn = BatchNormState.create(spec.output_dim, bn_momentum, bn_epsilon)
        if spec.final_extra_linear is not None:
            fan_in, fan_out = spec.output_dim, spec.final_extra_linear
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params["W_ext"] = rng.uniform(-limit, limit, (fan_in, fan_out))
            params["b_ext"] = np.zeros(fan_out)
        return cls(spec, params, bn)

    def weight_keys(self):
        """Keys of the dense weight matrices (the L2-regularized parameters)."""
        return [k for k in self.params if k.startswith("W")]

    def forward(self, x: np.ndarray, training: bool = False):
        """Run the net on a batch; returns (output, tape)."""
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise InvalidInput(
                f"expected batch of shape (B, {self.spec.input_dim}), got {x.shape}"
            )
        spec = self.spec
        p = self.params
        records = []
        h = x
        n_dense = len(spec.hidden_dims) + 1
        for i in range(n_dense - 1):
            z = h @ p[f"W{i}"] + p[f"b{i}"]
            records.append(("dense_relu", (h, i, z)))
            h = np.maximum(z, 0.0)
        i = n_dense - 1
        z = h @ p[f"W{i}"] + p[f"b{i}"]
        records.append(("dense", (h, i)))
        h = z
        if spec.output_relu:
            records.append(("relu", (h,)))
            h = np.maximum(h, 0.0)
        if spec.use_output_batchnorm:
            bn = self.bn
            if training:
                if h.shape[0] < 2:
                    raise InvalidInput("BN training mode needs a batch of at least 2 rows")
                mu = h.mean(axis=0)
                centered = h - mu
                var = np.einsum("ij,ij->j", centered, centered) / h.shape[0]
                inv_std = 1.0 / np.sqrt(var + bn.epsilon)
                x_hat = centered * inv_std
                bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * mu
                bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * var
            else:
                inv_std = 1.0 / np.sqrt(bn.running_var + bn.epsilon)
                x_hat = (h - bn.running_mean) * inv_std
            records.append(("bn", (x_hat, inv_std, training)))
            h = p["gamma"] * x_hat + p["beta"]
        if spec.final_extra_linear is not None:
            records.append(("dense_ext", (h,)))
            h = h @ p["W_ext"] + p["b_ext"]
        return h, Tape(records, training)

    def backward(self, tape: Tape, upstream: np.ndarray):
        """Exact gradients of the recorded forward pass.

        Returns (input_grad, grads) with grads keyed like params. Training
        tapes differentiate through the batch statistics.
        """
        if tape.consumed:
            raise TapeReuseError("tape has already been consumed")
        tape.consumed = True
        p = self.params
        grads = {}
        g = np.asarray(upstream)
        for kind, cache in reversed(tape.records):
            if kind == "dense_ext":
                (h,) = cache
                grads["W_ext"] = h.T @ g
                grads["b_ext"] = g.sum(axis=0)
                g = g @ p["W_ext"].T
            elif kind == "bn":
                x_hat, inv_std, training = cache
                grads["beta"] = g.sum(axis=0)
                grads["gamma"] = (g * x_hat).sum(axis=0)
                if training:
                    b = x_hat.shape[0]
                    g = (p["gamma"] * inv_std / b) * (
                        b * g - grads["beta"] - x_hat * grads["gamma"]
                    )
                else:
                    g = g * (p["gamma"] * inv_std)
            elif kind == "relu":
                (z,) = cache
                g = g * (z > 0)
            elif kind == "dense":
                h, i = cache
                grads[f"W{i}"] = h.T @ g
                grads[f"b{i}"] = g.sum(axis=0)
                g = g @ p[f"W{i}"].T
            elif kind == "dense_relu":
                h, i, z = cache
                g = g * (z > 0)
                grads[f"W{i}"] = h.T @ g
                grads[f"b{i}"] = g.sum(axis=0)
                g = g @ p[f"W{i}"].T
        return g, grads


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict):
    """One bias-corrected ADAM update, applied to params in place."""
    state.step_count += 1
    t = state.step_count
    corr1 = 1.0 - state.beta1 ** t
    corr2 = 1.0 - state.beta2 ** t
    for key, g in grads.items():
        m = state.first_moment.get(key)
        if m is None:
            m = state.first_moment[key] = np.zeros_like(g)
        v = state.second_moment.get(key)
        if v is None:
            v = state.second_moment[key] = np.zeros_like(g)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / corr1
        v_hat = v / corr2
        params[key] -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


@dataclass
class LossResult:
    total: float
    mse: float
    reg: float
    # complex (batch, n_antennas); real/imag parts are the partials with
    # respect to the real/imag parts of the prediction
    pred_grad: np.ndarray
    weight_grads: list


def mse_l2_loss(pred: np.ndarray, target: np.ndarray, weights=(), kappa: float = 0.0) -> LossResult:
    """Mean squared channel error plus an L2 penalty on the given weights.

    loss = sum |target - pred|^2 / (n_antennas * batch) + kappa * sum w^2
    """
    if pred.shape != target.shape or pred.ndim != 2:
        raise InvalidInput("pred and target must be equal-shape 2-D arrays")
    if kappa < 0:
        raise InvalidInput("kappa must be non-negative")
    m, nr = pred.shape
    err = pred - target
    mse = float(np.sum(err.real ** 2 + err.imag ** 2)) / (nr * m)
    reg = kappa * float(sum(np.sum(w * w) for w in weights))
    pred_grad = (2.0 / (nr * m)) * err
    weight_grads = [2.0 * kappa * w for w in weights]
    return LossResult(mse + reg, mse, reg, pred_grad, weight_grads)


def save_arrays(path, arrays: dict, manifest: dict) -> None:
    """Write named float arrays plus a JSON manifest to an .npz container.

    Array bytes round-trip exactly; the manifest travels as a JSON string
    under the reserved key __manifest__.
    """
    payload = dict(arrays)
    payload["__manifest__"] = np.array(json.dumps(manifest))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_arrays(path):
    """Inverse of save_arrays: returns (arrays, manifest)."""
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files if k != "__manifest__"}
        manifest = json.loads(str(data["__manifest__"][()]))
    return arrays, manifest
