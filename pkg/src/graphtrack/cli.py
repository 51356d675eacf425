"""Command-line front end.

Subcommands: generate (dataset artifact), train (checkpoint + loss CSV),
eval (metrics for a saved checkpoint), sweep (metrics CSV over a sweep
axis), reproduce (named experiment presets). Every run writes a run.json
manifest with the resolved config, seed and version, sufficient to replay
the run bit-identically.

Exit codes: 0 success, 1 usage, 2 config error, 3 runtime/training failure.
"""

import argparse
import json
import os
import subprocess
import sys

from .errors import InvalidInput, TrainingDiverged
from . import harness
from .baselines import FnnModel
from .gnn import GnnModel
from .nn import load_arrays
from .presets import PRESET_NAMES, make_preset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

OUTPUT_DIR_ENV = "GRAPHTRACK_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def version_string() -> str:
    try:
        from importlib import metadata

        base = f"graphtrack-{metadata.version('graphtrack')}"
    except Exception:
        base = "graphtrack-0.0.0"
    try:
        sha = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(__file__), capture_output=True, text=True, timeout=5,
        )
        if sha.returncode == 0 and sha.stdout.strip():
            return f"{base}+{sha.stdout.strip()}"
    except Exception:
        pass
    return base


def _build_parser() -> _Parser:
    parser = _Parser(prog="graphtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override, e.g. system.snr_db=10")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("generate", help="simulate a dataset artifact")
    add_common(p)
    p.add_argument("--split", default="train", choices=sorted(harness.SPLIT_CODES))
    p.add_argument("--n-samples", type=int, default=None)

    p = sub.add_parser("train", help="train one model and save a checkpoint")
    add_common(p)
    p.add_argument("--method", default="gnn", choices=["gnn", "fnn"])

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    add_common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("sweep", help="run the sweep described by the config")
    add_common(p)

    p = sub.add_parser("reproduce", help="run a named experiment preset")
    p.add_argument("preset", choices=list(PRESET_NAMES))
    p.add_argument("--full", action="store_true", help="full-scale profile")
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default=None)

    return parser


def _output_dir(args) -> str:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or "graphtrack_out"
    os.makedirs(out, exist_ok=True)
    return out


def _load_config(args) -> harness.ExperimentConfig:
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config {args.config} is not valid JSON: {exc}") from exc
    data = harness.apply_overrides(data, args.overrides)
    return harness.config_from_dict(data)


def _write_manifest(out_dir, args, config, extra=None) -> None:
    manifest = {
        "command": args.command,
        "config": harness.config_to_dict(config),
        "overrides": list(getattr(args, "overrides", [])),
        "seed": config.training.seed,
        "version": version_string(),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_model(path):
    """Load a checkpoint of either model kind."""
    _, manifest = load_arrays(path)
    kind = manifest.get("kind")
    if kind == "gnn":
        return GnnModel.load(path)
    if kind == "fnn":
        return FnnModel.load(path)
    raise InvalidInput(f"unknown checkpoint kind {kind!r}")


def _cmd_generate(args) -> int:
    config = _load_config(args)
    out_dir = _output_dir(args)
    samples = harness.generate_dataset(config, split=args.split, n_samples=args.n_samples)
    path = os.path.join(out_dir, f"dataset_{args.split}.npz")
    harness.save_dataset(samples, path)
    _write_manifest(out_dir, args, config, {"dataset": path, "n_samples": len(samples)})
    print(f"wrote {len(samples)} samples to {path}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _load_config(args)
    out_dir = _output_dir(args)
    train_set = harness.pack_dataset(harness.generate_dataset(config, "train"))
    val_set = None
    if config.training.n_val_samples > 0:
        val_set = harness.pack_dataset(harness.generate_dataset(config, "val"))
    eval_set = harness.pack_dataset(harness.generate_dataset(config, "eval"))
    model = harness.make_model(config, args.method)
    result = harness.train(model, train_set, config.training, val_dataset=val_set)
    row = harness.evaluate(model, eval_set, method=args.method, seed=config.training.seed)
    ckpt = os.path.join(out_dir, f"model_{args.method}.npz")
    model.save(ckpt, extra_manifest={"method": args.method, "eval_mse": row.mse})
    harness.write_history_csv(result.history, os.path.join(out_dir, "loss_history.csv"))
    _write_manifest(out_dir, args, config, {
        "method": args.method,
        "checkpoint": ckpt,
        "eval_mse": row.mse,
        "epochs_run": result.n_epochs_run,
        "best_epoch": result.best_epoch,
        "train_wall_time_s": result.wall_time_s,
    })
    print(f"{args.method} trained {result.n_epochs_run} epochs; eval mse={row.mse!r}")
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _load_config(args)
    out_dir = _output_dir(args)
    model = load_model(args.checkpoint)
    method = "gnn" if isinstance(model, GnnModel) else "fnn"
    eval_set = harness.pack_dataset(harness.generate_dataset(config, "eval"))
    row = harness.evaluate(model, eval_set, method=method, seed=config.training.seed)
    harness.write_metrics_csv([row], os.path.join(out_dir, "metrics.csv"))
    _write_manifest(out_dir, args, config, {"checkpoint": args.checkpoint, "eval_mse": row.mse})
    print(f"{method} eval mse={row.mse!r} over {row.n_samples} samples")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    if config.sweep is None:
        raise InvalidInput("config has no sweep section")
    out_dir = _output_dir(args)
    rows = harness.run_sweep(config, out_dir=out_dir, log=print)
    _write_manifest(out_dir, args, config, {"n_rows": len(rows)})
    print(f"wrote {len(rows)} rows to {os.path.join(out_dir, 'metrics.csv')}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    config = make_preset(args.preset, full=args.full,
                         seeds=args.seeds if args.seeds else (0, 1, 2))
    if args.overrides:
        data = harness.apply_overrides(harness.config_to_dict(config), args.overrides)
        config = harness.config_from_dict(data)
    out_dir = _output_dir(args)
    rows = harness.run_sweep(config, out_dir=out_dir, csv_name=f"{args.preset}.csv", log=print)
    _write_manifest(out_dir, args, config, {"preset": args.preset, "n_rows": len(rows)})
    print(f"wrote {len(rows)} rows to {os.path.join(out_dir, args.preset + '.csv')}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except InvalidInput as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
