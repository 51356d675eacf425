"""Graph-network channel tracker: shared-weight edge/vertex MLPs composed
into an encoder, a message-passing core, and a decoder over antenna graphs.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInput
from .graphs import ChannelGraph, concat_graphs, readout
from .nn import BatchNormState, Mlp, MlpSpec, load_arrays, save_arrays

MLP_NAMES = ("enc_edge", "enc_vertex", "core_edge", "core_vertex", "dec_edge", "dec_vertex")


@dataclass(frozen=True)
class GnnConfig:
    """Widths of the six MLPs and the number of core message-passing rounds."""

    raw_feature_dim: int = 4
    latent_dim: int = 8
    encoder_hidden: tuple = (16, 16)
    core_hidden: tuple = (16, 16)
    decoder_hidden: tuple = (16, 16, 8)
    decoder_out: int = 2
    core_rounds: int = 1
    output_relu: bool = False
    bn_momentum: float = 0.99
    bn_epsilon: float = 1e-5

    def __post_init__(self):
        if min(self.raw_feature_dim, self.latent_dim, self.core_rounds) < 1:
            raise InvalidInput("dims and core_rounds must be positive")
        if self.decoder_out != 2:
            raise InvalidInput("decoder_out must be 2 (complex readout)")

    def mlp_specs(self) -> dict:
        d = self.latent_dim
        enc = dict(use_output_batchnorm=True, output_relu=self.output_relu)
        return {
            "enc_edge": MlpSpec(self.raw_feature_dim, self.encoder_hidden, d, **enc),
            "enc_vertex": MlpSpec(self.raw_feature_dim, self.encoder_hidden, d, **enc),
            "core_edge": MlpSpec(3 * d, self.core_hidden, d, **enc),
            "core_vertex": MlpSpec(2 * d, self.core_hidden, d, **enc),
            "dec_edge": MlpSpec(d, self.decoder_hidden, self.decoder_out,
                                final_extra_linear=self.decoder_out, **enc),
            "dec_vertex": MlpSpec(d, self.decoder_hidden, self.decoder_out,
                                  final_extra_linear=self.decoder_out, **enc),
        }


def aggregate_incoming(edge_feats, src, dst, n_vertices, order=None):
    """Sum updated edge features at their destination vertex.

    Edges are reduced in ascending (dst, src) order so the result does not
    depend on the order the edge list arrived in. Vertices with no incoming
    edges get the zero vector.
    """
    if order is None:
        order = np.lexsort((src, dst))
    sorted_feats = edge_feats[order]
    counts = np.bincount(dst, minlength=n_vertices)
    if counts.size and counts.min() == counts.max() and counts[0] > 0:
        return sorted_feats.reshape(n_vertices, counts[0], -1).sum(axis=1)
    out = np.zeros((n_vertices, edge_feats.shape[1]))
    stops = np.cumsum(counts)
    starts = stops - counts
    for i in range(n_vertices):
        if counts[i]:
            out[i] = sorted_feats[starts[i]:stops[i]].sum(axis=0)
    return out


class _BatchTopology:
    """Flattened edge indexing for a stack of identical complete graphs."""

    def __init__(self, src, dst, n_vertices, batch):
        n_edges = len(src)
        offsets = (np.arange(batch) * n_vertices)[:, None]
        self.src = (src[None, :] + offsets).ravel()
        self.dst = (dst[None, :] + offsets).ravel()
        self.n_rows = batch * n_vertices
        self.n_edge_rows = batch * n_edges
        self.order_by_dst = np.lexsort((self.src, self.dst))
        self.order_by_src = np.lexsort((self.dst, self.src))


class GnnModel:
    """Parameter bundle for the encoder/core/decoder MLPs."""

    def __init__(self, config: GnnConfig, mlps: dict):
        self.config = config
        self.mlps = mlps
        self._topologies = {}

    @classmethod
    def create(cls, config: GnnConfig, seed: int = 0) -> "GnnModel":
        children = np.random.SeedSequence(seed).spawn(len(MLP_NAMES))
        mlps = {}
        for name, child in zip(MLP_NAMES, children):
            spec = config.mlp_specs()[name]
            mlps[name] = Mlp.create(spec, np.random.default_rng(child),
                                    config.bn_momentum, config.bn_epsilon)
        return cls(config, mlps)

    # -- parameter plumbing -------------------------------------------------

    def named_params(self) -> dict:
        return {
            f"{name}/{key}": arr
            for name, mlp in self.mlps.items()
            for key, arr in mlp.params.items()
        }

    def weight_arrays(self):
        """Dense weight matrices, the L2-regularized parameter subset."""
        return [
            self.mlps[name].params[key]
            for name in MLP_NAMES
            for key in self.mlps[name].weight_keys()
        ]

    def weight_names(self):
        return [
            f"{name}/{key}"
            for name in MLP_NAMES
            for key in self.mlps[name].weight_keys()
        ]

    def snapshot(self) -> dict:
        state = {"params": {}, "bn": {}}
        for name, mlp in self.mlps.items():
            state["params"][name] = {k: v.copy() for k, v in mlp.params.items()}
            if mlp.bn is not None:
                state["bn"][name] = (mlp.bn.running_mean.copy(), mlp.bn.running_var.copy())
        return state

    def restore(self, state: dict) -> None:
        for name, mlp in self.mlps.items():
            for k, v in state["params"][name].items():
                mlp.params[k] = v.copy()
            if mlp.bn is not None:
                mean, var = state["bn"][name]
                mlp.bn.running_mean = mean.copy()
                mlp.bn.running_var = var.copy()

    # -- forward / backward over flattened batches --------------------------

    def _topology(self, n_vertices, batch, src, dst) -> _BatchTopology:
        key = (n_vertices, batch)
        topo = self._topologies.get(key)
        if topo is None:
            topo = self._topologies[key] = _BatchTopology(src, dst, n_vertices, batch)
        return topo

    def forward_batch(self, vertices, edges, src, dst, training=False):
        """Predict channels for a batch of concatenated graphs.

        vertices: (B, Nr, F_raw), edges: (B, E, F_raw) in canonical edge
        order shared by all graphs; src/dst are the per-graph edge endpoints.
        Returns (predictions (B, Nr) complex, backward context).
        """
        batch, n_vertices, _ = vertices.shape
        topo = self._topology(n_vertices, batch, src, dst)
        v_flat = vertices.reshape(batch * n_vertices, -1)
        e_flat = edges.reshape(topo.n_edge_rows, -1)
        out, ctx = self._forward_flat(v_flat, e_flat, topo, training)
        ctx["shape"] = (batch, n_vertices)
        pred = readout(out).reshape(batch, n_vertices)
        return pred, ctx

    def backward_batch(self, ctx, pred_grad):
        """Parameter gradients given the loss gradient on the predictions.

        pred_grad is complex (B, Nr); its real/imag parts are the partials
        with respect to the real/imag feature channels.
        """
        batch, n_vertices = ctx["shape"]
        g = np.column_stack([pred_grad.real.ravel(), pred_grad.imag.ravel()])
        return self._backward_flat(ctx, g)

    def _forward_flat(self, v_flat, e_flat, topo, training):
        d = self.config.latent_dim
        v_lat, tape_ev = self.mlps["enc_vertex"].forward(v_flat, training)
        e_lat, tape_ee = self.mlps["enc_edge"].forward(e_flat, training)
        rounds = []
        for _ in range(self.config.core_rounds):
            edge_in = np.hstack([e_lat, v_lat[topo.src], v_lat[topo.dst]])
            e_new, tape_ce = self.mlps["core_edge"].forward(edge_in, training)
            agg = aggregate_incoming(e_new, topo.src, topo.dst, topo.n_rows,
                                     order=topo.order_by_dst)
            vert_in = np.hstack([agg, v_lat])
            v_new, tape_cv = self.mlps["core_vertex"].forward(vert_in, training)
            rounds.append((tape_ce, tape_cv))
            v_lat, e_lat = v_new, e_new
        out, tape_dv = self.mlps["dec_vertex"].forward(v_lat, training)
        ctx = {
            "topo": topo,
            "tapes": {"enc_vertex": tape_ev, "enc_edge": tape_ee, "dec_vertex": tape_dv},
            "rounds": rounds,
            "latent_dim": d,
        }
        return out, ctx

    def _backward_flat(self, ctx, g_out):
        topo = ctx["topo"]
        d = ctx["latent_dim"]
        grads = {}

        def take(name, mlp_grads):
            for key, val in mlp_grads.items():
                full = f"{name}/{key}"
                if full in grads:
                    grads[full] = grads[full] + val
                else:
                    grads[full] = val

        g_vlat, dec_grads = self.mlps["dec_vertex"].backward(ctx["tapes"]["dec_vertex"], g_out)
        take("dec_vertex", dec_grads)
        g_elat = None
        for tape_ce, tape_cv in reversed(ctx["rounds"]):
            g_vert_in, cv_grads = self.mlps["core_vertex"].backward(tape_cv, g_vlat)
            take("core_vertex", cv_grads)
            g_agg = g_vert_in[:, :d]
            # each updated edge fed both the aggregate at its destination and,
            # in the next round, the edge input directly
            g_e_new = g_agg[topo.dst]
            if g_elat is not None:
                g_e_new = g_e_new + g_elat
            g_edge_in, ce_grads = self.mlps["core_edge"].backward(tape_ce, g_e_new)
            take("core_edge", ce_grads)
            g_elat = g_edge_in[:, :d]
            g_vlat = (
                g_vert_in[:, d:]
                + aggregate_incoming(g_edge_in[:, d:2 * d], topo.dst, topo.src,
                                     topo.n_rows, order=topo.order_by_src)
                + aggregate_incoming(g_edge_in[:, 2 * d:], topo.src, topo.dst,
                                     topo.n_rows, order=topo.order_by_dst)
            )
        _, ev_grads = self.mlps["enc_vertex"].backward(ctx["tapes"]["enc_vertex"], g_vlat)
        take("enc_vertex", ev_grads)
        if g_elat is None:
            g_elat = np.zeros((topo.n_edge_rows, d))
        _, ee_grads = self.mlps["enc_edge"].backward(ctx["tapes"]["enc_edge"], g_elat)
        take("enc_edge", ee_grads)
        # the decoder edge head never touches the loss; keep zero gradients so
        # the optimizer state stays aligned (its weights still feel the L2 term)
        for key, arr in self.mlps["dec_edge"].params.items():
            grads[f"dec_edge/{key}"] = np.zeros_like(arr)
        return grads

    # -- persistence ---------------------------------------------------------

    def save(self, path, extra_manifest=None, optimizer=None) -> None:
        arrays = dict(self.named_params())
        for name, mlp in self.mlps.items():
            if mlp.bn is not None:
                arrays[f"{name}/bn_mean"] = mlp.bn.running_mean
                arrays[f"{name}/bn_var"] = mlp.bn.running_var
        if optimizer is not None:
            for key, val in optimizer.first_moment.items():
                arrays[f"adam/m/{key}"] = val
            for key, val in optimizer.second_moment.items():
                arrays[f"adam/v/{key}"] = val
        manifest = {
            "kind": "gnn",
            "config": {
                "raw_feature_dim": self.config.raw_feature_dim,
                "latent_dim": self.config.latent_dim,
                "encoder_hidden": list(self.config.encoder_hidden),
                "core_hidden": list(self.config.core_hidden),
                "decoder_hidden": list(self.config.decoder_hidden),
                "decoder_out": self.config.decoder_out,
                "core_rounds": self.config.core_rounds,
                "output_relu": self.config.output_relu,
                "bn_momentum": self.config.bn_momentum,
                "bn_epsilon": self.config.bn_epsilon,
            },
        }
        if optimizer is not None:
            manifest["adam"] = {
                "learning_rate": optimizer.learning_rate,
                "beta1": optimizer.beta1,
                "beta2": optimizer.beta2,
                "epsilon": optimizer.epsilon,
                "step_count": optimizer.step_count,
            }
        if extra_manifest:
            manifest.update(extra_manifest)
        save_arrays(path, arrays, manifest)

    @classmethod
    def load(cls, path) -> "GnnModel":
        arrays, manifest = load_arrays(path)
        if manifest.get("kind") != "gnn":
            raise InvalidInput(f"checkpoint kind {manifest.get('kind')!r} is not 'gnn'")
        cfg_dict = dict(manifest["config"])
        for key in ("encoder_hidden", "core_hidden", "decoder_hidden"):
            cfg_dict[key] = tuple(cfg_dict[key])
        config = GnnConfig(**cfg_dict)
        model = cls.create(config, seed=0)
        for name, mlp in model.mlps.items():
            for key in mlp.params:
                mlp.params[key] = arrays[f"{name}/{key}"].copy()
            if mlp.bn is not None:
                mlp.bn.running_mean = arrays[f"{name}/bn_mean"].copy()
                mlp.bn.running_var = arrays[f"{name}/bn_var"].copy()
        return model


# -- single-graph operations -------------------------------------------------


def _check_feature_dim(actual, expected, what):
    if actual != expected:
        raise InvalidInput(f"{what} feature dim {actual}, expected {expected}")


def gn_block(graph: ChannelGraph, edge_mlp: Mlp, vertex_mlp: Mlp, training: bool = False) -> ChannelGraph:
    """One graph-network round: update every directed edge from
    [edge; v_src; v_dst], sum updated edges at their destination vertex,
    then update every vertex from [aggregate; vertex]."""
    v, e = graph.vertices, graph.edges
    _check_feature_dim(e.shape[1] + 2 * v.shape[1], edge_mlp.spec.input_dim, "edge update input")
    edge_in = np.hstack([e, v[graph.edge_src], v[graph.edge_dst]])
    e_new, _ = edge_mlp.forward(edge_in, training)
    agg = aggregate_incoming(e_new, graph.edge_src, graph.edge_dst, graph.n_vertices)
    _check_feature_dim(agg.shape[1] + v.shape[1], vertex_mlp.spec.input_dim, "vertex update input")
    v_new, _ = vertex_mlp.forward(np.hstack([agg, v]), training)
    return replace(graph, vertices=v_new, edges=e_new)


def encode(graph: ChannelGraph, model: GnnModel, training: bool = False) -> ChannelGraph:
    """Lift raw vertex/edge features into the latent space, elementwise."""
    _check_feature_dim(graph.vertex_dim, model.config.raw_feature_dim, "vertex")
    _check_feature_dim(graph.edge_dim, model.config.raw_feature_dim, "edge")
    v, _ = model.mlps["enc_vertex"].forward(graph.vertices, training)
    e, _ = model.mlps["enc_edge"].forward(graph.edges, training)
    return replace(graph, vertices=v, edges=e)


def core(latent: ChannelGraph, model: GnnModel, rounds: int | None = None,
         training: bool = False) -> ChannelGraph:
    """Run the message-passing block `rounds` times with shared weights."""
    if rounds is None:
        rounds = model.config.core_rounds
    if rounds < 1:
        raise InvalidInput("rounds must be >= 1")
    g = latent
    for _ in range(rounds):
        g = gn_block(g, model.mlps["core_edge"], model.mlps["core_vertex"], training)
    return g


def decode(latent: ChannelGraph, model: GnnModel, training: bool = False) -> ChannelGraph:
    """Project latent features back to 2-feature predictions, elementwise.

    Edge outputs are produced for completeness but ignored by readout.
    """
    _check_feature_dim(latent.vertex_dim, model.config.latent_dim, "latent vertex")
    v, _ = model.mlps["dec_vertex"].forward(latent.vertices, training)
    e, _ = model.mlps["dec_edge"].forward(latent.edges, training)
    return replace(latent, vertices=v, edges=e)


def predict(g_now: ChannelGraph, g_past: ChannelGraph, model: GnnModel) -> np.ndarray:
    """Channel prediction for the current time index from the raw graph pair."""
    combined = concat_graphs(g_now, g_past)
    return readout(decode(core(encode(combined, model), model), model).vertices)
