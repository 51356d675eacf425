"""Experiment harness: dataset generation, training, evaluation and sweeps.

Seeding layout: every frame owns an RNG stream derived from
(seed, split_code, frame_index) where split codes are train=0, val=1,
eval=2; code 3 seeds the batch shuffle and code 4 the model init. Train,
validation and evaluation frames therefore never share a stream.
"""

import csv
import json
import math
import os
import time
from dataclasses import dataclass, replace, asdict

import numpy as np

from .errors import InvalidInput, TrainingDiverged
from .channel import FrameLayout, SystemConfig, build_ls_series, simulate_frame
from .graphs import ChannelGraph, build_graph, concat_graphs, ls_window
from .gnn import GnnConfig, GnnModel
from .baselines import FnnModel
from .nn import AdamState, adam_step, mse_l2_loss, save_arrays, load_arrays

SPLIT_CODES = {"train": 0, "val": 1, "eval": 2}
_SHUFFLE_CODE = 3
_MODEL_CODE = 4

SWEEP_AXES = ("L", "K", "learning_rate", "snr_db", "user_speed")
METHOD_NAMES = ("gnn", "fnn", "ls")


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 20
    learning_rate: float = 1e-3
    kappa: float = 0.1
    n_train_samples: int = 2000
    n_epochs: int = 50
    seed: int = 0
    patience: int = 10
    n_val_samples: int = 200

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidInput("batch_size must be >= 2")
        if self.kappa < 0 or self.learning_rate < 0:
            raise InvalidInput("kappa and learning_rate must be non-negative")
        if self.seed < 0:
            raise InvalidInput("seed must be non-negative")


@dataclass(frozen=True)
class EvalConfig:
    n_eval_samples: int = 2000


@dataclass(frozen=True)
class MethodSpec:
    """One method of a sweep, with optional per-method training overrides
    (methods converge at very different rates)."""

    name: str
    learning_rate: float | None = None
    n_epochs: int | None = None
    patience: int | None = None

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise InvalidInput(f"unknown method {self.name!r}")

    def resolve_training(self, training: TrainingConfig, axis: str = "",
                         sweep_value=None) -> TrainingConfig:
        lr = training.learning_rate
        if axis == "learning_rate" and sweep_value is not None:
            lr = float(sweep_value)
        elif self.learning_rate is not None:
            lr = self.learning_rate
        return replace(
            training,
            learning_rate=float(lr),
            n_epochs=self.n_epochs if self.n_epochs is not None else training.n_epochs,
            patience=self.patience if self.patience is not None else training.patience,
        )


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    methods: tuple = (MethodSpec("gnn"),)
    seeds: tuple = ()
    train_matched: bool = True

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise InvalidInput(f"unknown sweep axis {self.axis!r}; one of {SWEEP_AXES}")
        if not self.values:
            raise InvalidInput("sweep values must be non-empty")
        if not self.methods:
            raise InvalidInput("sweep methods must be non-empty")


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = SystemConfig()
    layout: FrameLayout = FrameLayout()
    window_len: int = 10
    samples_per_frame: int = 20
    model: GnnConfig = GnnConfig()
    training: TrainingConfig = TrainingConfig()
    evaluation: EvalConfig = EvalConfig()
    sweep: SweepSpec | None = None

    def __post_init__(self):
        if self.window_len < 2:
            raise InvalidInput("window_len must be >= 2")
        if self.samples_per_frame < 1:
            raise InvalidInput("samples_per_frame must be >= 1")


def apply_sweep_value(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """Derived config with one sweep axis pinned to a value."""
    if axis == "L":
        return replace(config, window_len=int(value))
    if axis == "K":
        return replace(config, layout=replace(config.layout, group_len=int(value)))
    if axis == "learning_rate":
        return replace(config, training=replace(config.training, learning_rate=float(value)))
    if axis == "snr_db":
        return replace(config, system=replace(config.system, snr_db=float(value)))
    if axis == "user_speed":
        return replace(config, system=replace(config.system, user_speed=float(value)))
    raise InvalidInput(f"unknown sweep axis {axis!r}")


# -- dataset -------------------------------------------------------------------


@dataclass(frozen=True)
class SampleMeta:
    time_index: int
    snr_db: float
    speed: float
    frame_index: int
    split_code: int
    frame_seed: tuple
    paths: object = None  # PathSet of the source frame; not serialized


@dataclass(frozen=True)
class DatasetSample:
    g_now: ChannelGraph
    g_past: ChannelGraph
    target: np.ndarray
    meta: SampleMeta


@dataclass(frozen=True)
class PackedDataset:
    """Concatenated graph features stacked for batched model calls."""

    vertices: np.ndarray  # (S, Nr, 4)
    edges: np.ndarray     # (S, E, 4)
    src: np.ndarray
    dst: np.ndarray
    targets: np.ndarray   # (S, Nr) complex

    @property
    def n_samples(self) -> int:
        return self.targets.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.targets.shape[1]

    def ls_predictions(self) -> np.ndarray:
        """Hold-extended LS estimates (the first two vertex features)."""
        return self.vertices[:, :, 0] + 1j * self.vertices[:, :, 1]


def eligible_indices(layout: FrameLayout, window_len: int) -> np.ndarray:
    """Data-symbol indices usable as prediction targets: past the window/lag
    bootstrap region and not pilot positions."""
    k = layout.group_len
    total = layout.n_symbols
    start = max(window_len, k)
    idx = np.arange(start, total)
    idx = idx[idx % k != 0]
    if idx.size == 0:
        raise InvalidInput(
            f"layout of {total} symbols leaves no data indices past max(L, K)={start}"
        )
    return idx


def generate_dataset(config: ExperimentConfig, split: str = "train",
                     n_samples: int | None = None) -> list:
    """Simulate frames and cut (current graph, lagged graph, true channel)
    samples at data-symbol indices. Deterministic in (seed, split)."""
    if split not in SPLIT_CODES:
        raise InvalidInput(f"unknown split {split!r}")
    split_code = SPLIT_CODES[split]
    if n_samples is None:
        n_samples = {
            "train": config.training.n_train_samples,
            "val": config.training.n_val_samples,
            "eval": config.evaluation.n_eval_samples,
        }[split]
    if n_samples == 0:
        return []
    layout = config.layout
    lag = layout.group_len
    window_len = config.window_len
    eligible = eligible_indices(layout, window_len)
    samples = []
    frame_index = 0
    base_seed = config.training.seed
    while len(samples) < n_samples:
        frame_seed = (base_seed, split_code, frame_index)
        rng = np.random.default_rng(np.random.SeedSequence(frame_seed))
        frame = simulate_frame(config.system, layout, rng)
        series = build_ls_series(frame.received, frame.stream)
        picks = rng.permutation(eligible)[: config.samples_per_frame]
        for n in sorted(picks.tolist()):
            g_now = build_graph(ls_window(series.estimates, n, window_len), n)
            g_past = build_graph(ls_window(series.estimates, n - lag, window_len), n - lag)
            meta = SampleMeta(
                time_index=n,
                snr_db=config.system.snr_db,
                speed=config.system.user_speed,
                frame_index=frame_index,
                split_code=split_code,
                frame_seed=frame_seed,
                paths=frame.paths,
            )
            samples.append(DatasetSample(g_now, g_past, frame.channels[n].copy(), meta))
            if len(samples) == n_samples:
                break
        frame_index += 1
    return samples


def pack_dataset(samples: list) -> PackedDataset:
    if not samples:
        raise InvalidInput("cannot pack an empty dataset")
    combined = [concat_graphs(s.g_now, s.g_past) for s in samples]
    first = combined[0]
    return PackedDataset(
        vertices=np.stack([g.vertices for g in combined]),
        edges=np.stack([g.edges for g in combined]),
        src=first.edge_src.copy(),
        dst=first.edge_dst.copy(),
        targets=np.stack([s.target for s in samples]),
    )


def save_dataset(samples: list, path) -> None:
    """Dataset artifact: raw graph features as float64 pairs, canonical edge
    ordering, plus per-sample metadata."""
    if not samples:
        raise InvalidInput("cannot save an empty dataset")
    first = samples[0].g_now
    arrays = {
        "now_vertices": np.stack([s.g_now.vertices for s in samples]),
        "now_edges": np.stack([s.g_now.edges for s in samples]),
        "past_vertices": np.stack([s.g_past.vertices for s in samples]),
        "past_edges": np.stack([s.g_past.edges for s in samples]),
        "edge_src": first.edge_src,
        "edge_dst": first.edge_dst,
        "target_re": np.stack([s.target.real for s in samples]),
        "target_im": np.stack([s.target.imag for s in samples]),
        "time_index": np.array([s.meta.time_index for s in samples]),
        "past_time_index": np.array([s.g_past.time_index for s in samples]),
        "snr_db": np.array([s.meta.snr_db for s in samples]),
        "speed": np.array([s.meta.speed for s in samples]),
        "frame_index": np.array([s.meta.frame_index for s in samples]),
        "split_code": np.array([s.meta.split_code for s in samples]),
        "seed": np.array([s.meta.frame_seed[0] for s in samples]),
    }
    manifest = {
        "kind": "dataset",
        "n_samples": len(samples),
        "n_antennas": first.n_vertices,
    }
    save_arrays(path, arrays, manifest)


def load_dataset(path) -> list:
    arrays, manifest = load_arrays(path)
    if manifest.get("kind") != "dataset":
        raise InvalidInput("file is not a dataset artifact")
    samples = []
    src = arrays["edge_src"]
    dst = arrays["edge_dst"]
    for i in range(manifest["n_samples"]):
        n = int(arrays["time_index"][i])
        n_past = int(arrays["past_time_index"][i])
        g_now = ChannelGraph(arrays["now_vertices"][i], src, dst, arrays["now_edges"][i], n)
        g_past = ChannelGraph(arrays["past_vertices"][i], src, dst, arrays["past_edges"][i], n_past)
        meta = SampleMeta(
            time_index=n,
            snr_db=float(arrays["snr_db"][i]),
            speed=float(arrays["speed"][i]),
            frame_index=int(arrays["frame_index"][i]),
            split_code=int(arrays["split_code"][i]),
            frame_seed=(int(arrays["seed"][i]), int(arrays["split_code"][i]),
                        int(arrays["frame_index"][i])),
        )
        target = arrays["target_re"][i] + 1j * arrays["target_im"][i]
        samples.append(DatasetSample(g_now, g_past, target, meta))
    return samples


# -- models --------------------------------------------------------------------


def make_model(config: ExperimentConfig, method: str, seed: int | None = None):
    """Freshly initialized model for a method name ('ls' needs no model)."""
    if seed is None:
        seed = config.training.seed
    if method == "gnn":
        return GnnModel.create(config.model, seed=(seed, _MODEL_CODE))
    if method == "fnn":
        return FnnModel.create(config.system.n_antennas, seed=(seed, _MODEL_CODE))
    if method == "ls":
        return None
    raise InvalidInput(f"unknown method {method!r}")


# -- training ------------------------------------------------------------------


@dataclass
class HistoryRow:
    epoch: int
    train_mse: float
    train_reg: float
    val_mse: float


@dataclass
class TrainResult:
    model: object
    history: list
    best_epoch: int
    n_epochs_run: int
    wall_time_s: float


def _batch_predictions(model, packed: PackedDataset, batch_size: int = 200) -> np.ndarray:
    preds = np.empty_like(packed.targets)
    for start in range(0, packed.n_samples, batch_size):
        stop = min(start + batch_size, packed.n_samples)
        preds[start:stop], _ = model.forward_batch(
            packed.vertices[start:stop], packed.edges[start:stop],
            packed.src, packed.dst, training=False,
        )
    return preds


def dataset_mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error per complex channel element, accumulated with an
    exact (order-independent) sum over samples."""
    if predictions.shape != targets.shape:
        raise InvalidInput("prediction/target shape mismatch")
    err = predictions - targets
    per_sample = np.sum(err.real ** 2 + err.imag ** 2, axis=1)
    s, nr = targets.shape
    return math.fsum(per_sample.tolist()) / (nr * s)


def train(model, dataset, cfg: TrainingConfig, val_dataset=None) -> TrainResult:
    """Minibatch ADAM on the regularized tracking loss.

    One epoch visits every batch of a fixed shuffled partition of the
    dataset. When a validation set is given, training stops after
    `patience` epochs without a new best validation MSE and the best
    parameters are restored.
    """
    t_start = time.perf_counter()
    packed = dataset if isinstance(dataset, PackedDataset) else pack_dataset(dataset)
    val_packed = None
    if val_dataset is not None:
        val_packed = val_dataset if isinstance(val_dataset, PackedDataset) else pack_dataset(val_dataset)
    n = packed.n_samples
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _SHUFFLE_CODE)))
    order = rng.permutation(n)
    batches = [order[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
    optimizer = AdamState(learning_rate=cfg.learning_rate)
    weight_names = model.weight_names()
    history = []
    best_val = np.inf
    best_epoch = 0
    best_state = None
    epochs_run = 0
    for epoch in range(1, cfg.n_epochs + 1):
        epochs_run = epoch
        mse_acc = 0.0
        reg_acc = 0.0
        for batch in batches:
            pred, ctx = model.forward_batch(
                packed.vertices[batch], packed.edges[batch],
                packed.src, packed.dst, training=True,
            )
            loss = mse_l2_loss(pred, packed.targets[batch],
                               weights=model.weight_arrays(), kappa=cfg.kappa)
            if not np.isfinite(loss.total):
                raise TrainingDiverged(epoch)
            grads = model.backward_batch(ctx, loss.pred_grad)
            for name, wgrad in zip(weight_names, loss.weight_grads):
                grads[name] = grads[name] + wgrad
            adam_step(optimizer, model.named_params(), grads)
            mse_acc += loss.mse
            reg_acc += loss.reg
        train_mse = mse_acc / len(batches)
        train_reg = reg_acc / len(batches)
        val_mse = math.nan
        if val_packed is not None:
            val_mse = dataset_mse(_batch_predictions(model, val_packed), val_packed.targets)
            if val_mse < best_val:
                best_val = val_mse
                best_epoch = epoch
                best_state = model.snapshot()
            elif epoch - best_epoch >= cfg.patience:
                history.append(HistoryRow(epoch, train_mse, train_reg, val_mse))
                break
        history.append(HistoryRow(epoch, train_mse, train_reg, val_mse))
    if best_state is not None:
        model.restore(best_state)
    if best_epoch == 0:
        best_epoch = epochs_run
    return TrainResult(
        model=model,
        history=history,
        best_epoch=best_epoch,
        n_epochs_run=epochs_run,
        wall_time_s=time.perf_counter() - t_start,
    )


# -- evaluation ----------------------------------------------------------------


@dataclass
class MetricsRow:
    sweep_axis: str
    sweep_value: object
    method: str
    mse: float
    n_samples: int
    wall_time_s: float
    seed: int


def evaluate(model, dataset, method: str = "gnn", seed: int = 0,
             sweep_axis: str = "", sweep_value=None, batch_size: int = 200) -> MetricsRow:
    """MSE of a model (or the LS baseline when method='ls') on a dataset."""
    packed = dataset if isinstance(dataset, PackedDataset) else pack_dataset(dataset)
    if packed.n_samples == 0:
        raise InvalidInput("cannot evaluate on an empty dataset")
    t0 = time.perf_counter()
    if method == "ls":
        preds = packed.ls_predictions()
    else:
        preds = _batch_predictions(model, packed, batch_size)
    mse = dataset_mse(preds, packed.targets)
    return MetricsRow(
        sweep_axis=sweep_axis,
        sweep_value=sweep_value,
        method=method,
        mse=mse,
        n_samples=packed.n_samples,
        wall_time_s=time.perf_counter() - t0,
        seed=seed,
    )


# -- sweeps --------------------------------------------------------------------


def _point_datasets(config: ExperimentConfig):
    train_set = pack_dataset(generate_dataset(config, "train"))
    val_set = None
    if config.training.n_val_samples > 0:
        val_set = pack_dataset(generate_dataset(config, "val"))
    eval_set = pack_dataset(generate_dataset(config, "eval"))
    return train_set, val_set, eval_set


def train_and_evaluate(config: ExperimentConfig, method: str,
                       datasets=None) -> tuple:
    """Train one method at one config point and evaluate it.

    Returns (MetricsRow, TrainResult or None). Datasets may be passed in to
    share one artifact across methods.
    """
    seed = config.training.seed
    if datasets is None:
        datasets = _point_datasets(config)
    train_set, val_set, eval_set = datasets
    t0 = time.perf_counter()
    result = None
    model = make_model(config, method, seed)
    if method != "ls":
        result = train(model, train_set, config.training, val_dataset=val_set)
    row = evaluate(model, eval_set, method=method, seed=seed)
    row.wall_time_s = time.perf_counter() - t0
    return row, result


def _job_signature(point: ExperimentConfig, method: str) -> str:
    resolved = config_to_dict(point)
    resolved.pop("sweep", None)  # the sweep section does not affect one job
    return json.dumps({"method": method, "config": resolved}, sort_keys=True)


def run_sweep(config: ExperimentConfig, out_dir=None, csv_name: str = "metrics.csv",
              log=None, cache: dict | None = None) -> list:
    """Train and evaluate every (sweep value, method, seed) combination.

    Datasets are generated per (value, seed) and shared by all methods at
    that point. Rows are written to a CSV when out_dir is given. A `cache`
    dict (keyed by resolved point config + method) lets several sweeps share
    identical jobs, e.g. a point common to two presets.
    """
    if config.sweep is None:
        raise InvalidInput("config has no sweep section")
    sweep = config.sweep
    seeds = tuple(sweep.seeds) or (config.training.seed,)
    rows = []
    if not sweep.train_matched and sweep.axis not in ("snr_db", "user_speed"):
        raise InvalidInput("train-mismatched sweeps only make sense for snr_db or user_speed")

    if sweep.train_matched:
        for value in sweep.values:
            for seed in seeds:
                point = apply_sweep_value(config, sweep.axis, value)
                point = replace(point, training=replace(point.training, seed=seed))
                datasets = None
                for method in sweep.methods:
                    m_point = replace(
                        point,
                        training=method.resolve_training(point.training, sweep.axis, value),
                    )
                    sig = None
                    if cache is not None:
                        sig = _job_signature(m_point, method.name)
                    if sig is not None and sig in cache:
                        row = replace(cache[sig])
                    else:
                        if datasets is None:
                            datasets = _point_datasets(point)
                        row, _ = train_and_evaluate(m_point, method.name, datasets)
                        if sig is not None:
                            cache[sig] = replace(row)
                    row.sweep_axis = sweep.axis
                    row.sweep_value = value
                    rows.append(row)
                    if log:
                        log(f"{sweep.axis}={value} seed={seed} {method.name}: mse={row.mse:.6g}")
    else:
        # train once per (method, seed) at the base config, evaluate everywhere
        trained = {}
        for seed in seeds:
            base = replace(config, training=replace(config.training, seed=seed))
            base_sets = _point_datasets(base)
            for method in sweep.methods:
                m_base = replace(base, training=method.resolve_training(base.training))
                t0 = time.perf_counter()
                model = make_model(m_base, method.name, seed)
                if method.name != "ls":
                    train(model, base_sets[0], m_base.training, val_dataset=base_sets[1])
                trained[(method.name, seed)] = (model, time.perf_counter() - t0)
        for value in sweep.values:
            for seed in seeds:
                point = apply_sweep_value(config, sweep.axis, value)
                point = replace(point, training=replace(point.training, seed=seed))
                eval_set = pack_dataset(generate_dataset(point, "eval"))
                for method in sweep.methods:
                    model, train_time = trained[(method.name, seed)]
                    row = evaluate(model, eval_set, method=method.name, seed=seed,
                                   sweep_axis=sweep.axis, sweep_value=value)
                    row.wall_time_s += train_time
                    rows.append(row)
                    if log:
                        log(f"{sweep.axis}={value} seed={seed} {method.name}: mse={row.mse:.6g}")

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics_csv(rows, os.path.join(out_dir, csv_name))
    return rows


# -- CSV artifacts ---------------------------------------------------------------


METRICS_HEADER = ["sweep_axis", "sweep_value", "method", "mse", "n_samples", "wall_time_s", "seed"]


def write_metrics_csv(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow([r.sweep_axis, r.sweep_value, r.method,
                             repr(r.mse), r.n_samples, repr(r.wall_time_s), r.seed])


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def read_metrics_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRICS_HEADER:
            raise InvalidInput(f"unexpected metrics header {header}")
        for rec in reader:
            rows.append(MetricsRow(
                sweep_axis=rec[0],
                sweep_value=_parse_value(rec[1]),
                method=rec[2],
                mse=float(rec[3]),
                n_samples=int(rec[4]),
                wall_time_s=float(rec[5]),
                seed=int(rec[6]),
            ))
    return rows


def write_history_csv(history: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "train_reg", "val_mse"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_mse), repr(row.train_reg),
                             repr(row.val_mse)])


# -- config (de)serialization ----------------------------------------------------


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {
        "system": asdict(config.system),
        "layout": asdict(config.layout),
        "window_len": config.window_len,
        "samples_per_frame": config.samples_per_frame,
        "model": asdict(config.model),
        "training": asdict(config.training),
        "evaluation": asdict(config.evaluation),
    }
    for key in ("encoder_hidden", "core_hidden", "decoder_hidden"):
        out["model"][key] = list(out["model"][key])
    if config.sweep is not None:
        out["sweep"] = {
            "axis": config.sweep.axis,
            "values": list(config.sweep.values),
            "methods": [asdict(m) for m in config.sweep.methods],
            "seeds": list(config.sweep.seeds),
            "train_matched": config.sweep.train_matched,
        }
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    kwargs = {}
    if "system" in data:
        kwargs["system"] = SystemConfig(**data["system"])
    if "layout" in data:
        kwargs["layout"] = FrameLayout(**data["layout"])
    for key in ("window_len", "samples_per_frame"):
        if key in data:
            kwargs[key] = int(data[key])
    if "model" in data:
        model = dict(data["model"])
        for key in ("encoder_hidden", "core_hidden", "decoder_hidden"):
            if key in model:
                model[key] = tuple(model[key])
        kwargs["model"] = GnnConfig(**model)
    if "training" in data:
        kwargs["training"] = TrainingConfig(**data["training"])
    if "evaluation" in data:
        kwargs["evaluation"] = EvalConfig(**data["evaluation"])
    if data.get("sweep") is not None:
        sw = dict(data["sweep"])
        methods = tuple(MethodSpec(**m) for m in sw.get("methods", [{"name": "gnn"}]))
        kwargs["sweep"] = SweepSpec(
            axis=sw["axis"],
            values=tuple(sw["values"]),
            methods=methods,
            seeds=tuple(sw.get("seeds", ())),
            train_matched=bool(sw.get("train_matched", True)),
        )
    return ExperimentConfig(**kwargs)


def apply_overrides(data: dict, overrides: list) -> dict:
    """Apply dotted key=value overrides (values parsed as JSON when possible)."""
    for item in overrides:
        if "=" not in item:
            raise InvalidInput(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return data
