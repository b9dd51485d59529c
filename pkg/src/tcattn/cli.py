"""Command-line entry point: gen, train, eval, attn, gradcheck.

Run settings come from a flat UTF-8 ``key = value`` file (``--config``)
with per-key ``--key value`` overrides. Every run writes the fully resolved
settings to ``<out>/resolved.cfg``.

Exit codes: 0 success, 1 runtime failure, 2 usage, 3 config, 4 data.
Errors are reported on stderr as one JSON line ``{"error", "detail"}``.
"""

import argparse
import inspect
import json
import os
import sys

import numpy as np

from . import __version__
from .datasets import GENERATORS, DatasetError, export_dataset, load_csv_dataset
from .gradcheck import TOLERANCE, run_suite
from .metrics import (
    AttentionReport,
    attention_entropy,
    classification_report,
    export_attention_csv,
    export_heatmap,
    mse_at_horizons,
    predict,
    summary_json,
)
from .models import CheckpointError, ConfigError, Model, ModelConfig, load_model, save_model
from .tensor import ShapeError
from .training import TrainConfig, TrainingError, train

EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA = 1, 2, 3, 4


class UsageError(Exception):
    pass


# name -> (type, default, help). "auto" defers the value to the dataset.
KEYS = {
    # data and outputs
    "data": (str, "", "training dataset: manifest.json or the directory holding it"),
    "test_data": (str, "", "evaluation dataset for eval/attn (default: data)"),
    "out": (str, "run", "output directory"),
    "checkpoint": (str, "", "checkpoint for eval/attn (default: <out>/checkpoint.json)"),
    # model
    "kind": (str, "auto", "autoencoder | classifier | auto (classifier iff the dataset has labels)"),
    "attention": (str, "tcl", "tcl | ffatt (feed-forward baseline)"),
    "g": (int, 16, "encoder width"),
    "m": (int, 0, "output steps; 0 = from the dataset (1 for classifiers)"),
    "encoder_activation": (str, "tanh", "linear | tanh | relu"),
    "decoder_activation": (str, "linear", "autoencoder head activation"),
    "mask_enabled": (str, "auto", "true | false | auto (true iff the dataset has padding)"),
    "attention_width": (int, 0, "hidden width of the ffatt scorer; 0 = g"),
    "init_seed": (int, -1, "parameter initialisation seed; -1 = seed"),
    # training
    "batch_size": (int, 8, "minibatch size"),
    "max_epochs": (int, 50, "epoch limit"),
    "learning_rate": (float, 1e-3, "step size"),
    "optimizer": (str, "adam", "adam | sgd"),
    "beta1": (float, 0.9, "Adam first-moment decay"),
    "beta2": (float, 0.999, "Adam second-moment decay"),
    "adam_eps": (float, 1e-8, "Adam denominator offset"),
    "loss": (str, "auto", "mse | cross_entropy | auto (by model kind)"),
    "sparsity_lambda": (float, 0.0, "weight of the negative-L2 attention penalty"),
    "early_stop_min_delta": (float, 0.01, "smallest validation improvement that counts"),
    "early_stop_patience": (int, 0, "epochs of small improvement before stopping; 0 = off"),
    "seed": (int, 0, "split/shuffle seed"),
    "validation_fraction": (float, 0.1, "share of the training data held out"),
    "codec_pretrain_epochs": (int, 0, "per-frame encoder/head pretraining epochs (autoencoders)"),
    # evaluation
    "horizons": (str, "", "comma-separated output-frame indices for per-horizon MSE"),
    "attn_max": (int, 0, "attn: export at most this many sequences; 0 = all"),
}


def _convert(key, raw):
    typ = KEYS[key][0]
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from exc


def read_config(path):
    """Parse a ``key = value`` file; '#' starts a comment."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, value)
    return values


def resolve(args):
    cfg = {k: spec[1] for k, spec in KEYS.items()}
    if args.config:
        cfg.update(read_config(args.config))
    for key in KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            cfg[key] = _convert(key, raw)
    return cfg


def write_resolved(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        for key in KEYS:
            fh.write(f"{key} = {cfg[key]}\n")


def _load_data(path, what="data"):
    if not path:
        raise ConfigError(f"{what} is not set")
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    return load_csv_dataset(path)


def _parse_bool(key, value):
    v = str(value).lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false/auto, got {value!r}")


def build_configs(cfg, ds):
    kind = cfg["kind"]
    if kind == "auto":
        kind = "classifier" if ds.labels is not None else "autoencoder"
    if (kind == "classifier") != (ds.labels is not None):
        raise ConfigError(f"kind {kind} does not fit a {'labelled' if ds.labels is not None else 'unlabelled'} dataset")
    if cfg["mask_enabled"] == "auto":
        mask_enabled = not all(bool(np.all(mk)) for mk in ds.masks)
    else:
        mask_enabled = _parse_bool("mask_enabled", cfg["mask_enabled"])
    m = 1 if kind == "classifier" else ds.m
    if cfg["m"] and cfg["m"] != m:
        raise ConfigError(f"m = {cfg['m']} but the dataset implies {m}")
    model_cfg = ModelConfig(
        kind=kind, n=ds.n, m=m, f=ds.f, g=cfg["g"],
        num_classes=ds.num_classes if kind == "classifier" else 0,
        encoder_activation=cfg["encoder_activation"], decoder_activation=cfg["decoder_activation"],
        mask_enabled=mask_enabled, attention=cfg["attention"], attention_width=cfg["attention_width"],
    )
    loss = cfg["loss"]
    if loss == "auto":
        loss = "cross_entropy" if kind == "classifier" else "mse"
    try:
        train_cfg = TrainConfig(
            batch_size=cfg["batch_size"], max_epochs=cfg["max_epochs"], learning_rate=cfg["learning_rate"],
            optimizer=cfg["optimizer"], beta1=cfg["beta1"], beta2=cfg["beta2"], adam_eps=cfg["adam_eps"],
            loss=loss, sparsity_lambda=cfg["sparsity_lambda"], early_stop_min_delta=cfg["early_stop_min_delta"],
            early_stop_patience=cfg["early_stop_patience"], seed=cfg["seed"],
            validation_fraction=cfg["validation_fraction"], codec_pretrain_epochs=cfg["codec_pretrain_epochs"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return model_cfg, train_cfg


def cmd_gen(args, extra):
    fn = GENERATORS.get(args.task)
    if fn is None:
        raise UsageError(f"unknown task {args.task!r}; choose from {sorted(GENERATORS)}")
    sig = inspect.signature(fn).parameters
    kwargs = {}
    if len(extra) % 2:
        raise UsageError(f"generator options must be --key value pairs, got {extra}")
    for flag, raw in zip(extra[::2], extra[1::2]):
        key = flag[2:] if flag.startswith("--") else None
        if key not in sig or key in ("seed", "count"):
            raise UsageError(f"unknown {args.task} option {flag!r}; accepted: "
                             + ", ".join(k for k in sig if k not in ("seed", "count")))
        default = sig[key].default
        typ = float if isinstance(default, float) else int if isinstance(default, int) else None
        try:
            kwargs[key] = typ(raw) if typ else (None if raw == "none" else int(raw))
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    try:
        ds = fn(args.seed, args.count, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    export_dataset(ds, args.out)
    print(json.dumps({"task": args.task, "count": len(ds), "manifest": os.path.join(args.out, "manifest.json")}))
    return 0


def cmd_train(args):
    cfg = resolve(args)
    ds = _load_data(cfg["data"])
    model_cfg, train_cfg = build_configs(cfg, ds)
    init_seed = cfg["seed"] if cfg["init_seed"] < 0 else cfg["init_seed"]
    model = Model.init(model_cfg, init_seed)
    best, history = train(model, ds, train_cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    ckpt = os.path.join(cfg["out"], "checkpoint.json")
    save_model(best, ckpt)
    history.to_csv(os.path.join(cfg["out"], "history.csv"))
    write_resolved(cfg, os.path.join(cfg["out"], "resolved.cfg"))
    print(json.dumps({
        "checkpoint": ckpt, "epochs": len(history.records), "best_epoch": history.best_epoch,
        "best_val_loss": history.records[history.best_epoch].val_loss, "stopped_early": history.stopped_early,
    }))
    return 0


def _eval_inputs(cfg):
    ckpt = cfg["checkpoint"] or os.path.join(cfg["out"], "checkpoint.json")
    if not os.path.isfile(ckpt):
        raise CheckpointError(f"checkpoint not found: {ckpt}")
    model = load_model(ckpt)
    ds = _load_data(cfg["test_data"] or cfg["data"], "test_data/data")
    c = model.config
    if (ds.n, ds.f) != (c.n, c.f):
        raise DatasetError(f"dataset (n, f) = ({ds.n}, {ds.f}) does not match checkpoint ({c.n}, {c.f})")
    return model, ds


def _truth(t):
    """Attention ground truth of one sequence: key index, motif window or None."""
    if "key_index" in t:
        return int(t["key_index"])
    if "motif_start" in t:
        return (int(t["motif_start"]), int(t["motif_end"]))
    return None


def cmd_eval(args):
    cfg = resolve(args)
    model, ds = _eval_inputs(cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    outs, A = predict(model, ds)
    ent = attention_entropy(A)
    report = {
        "kind": model.config.kind, "task": ds.task, "count": len(ds),
        "median_entropy": float(np.median(ent)), "mean_entropy": float(np.mean(ent)),
    }
    reports = [AttentionReport.build(a, _truth(t)) for a, t in zip(A, ds.truths)]
    correct = np.ones(len(ds), dtype=bool)
    if model.config.kind == "classifier":
        acc, cm = classification_report(model, ds)
        report.update(accuracy=acc, confusion=cm)
        correct = np.argmax(outs[:, 0, :], axis=-1) == np.asarray(ds.labels)
        np.savetxt(os.path.join(cfg["out"], "confusion.csv"), cm, fmt="%d", delimiter=",")
    else:
        _, T, _ = ds.stacked("autoencoder")
        report["mse"] = float(np.mean((outs - T) ** 2))
        if cfg["horizons"]:
            try:
                hs = [int(h) for h in cfg["horizons"].split(",")]
            except ValueError as exc:
                raise ConfigError(f"horizons: {exc}") from exc
            vals = mse_at_horizons(outs, T, hs)
            report["horizon_mse"] = {str(h): v for h, v in zip(hs, vals)}
            with open(os.path.join(cfg["out"], "horizons.csv"), "w", encoding="utf-8") as fh:
                fh.write("horizon,mse\n")
                fh.writelines(f"{h},{v:.17g}\n" for h, v in zip(hs, vals))
    hits = [r.detection_hits for r in reports]
    if all(h is not None for h in hits) and model.config.m == 1:
        first = np.array([bool(h[0]) for h in hits])
        if ds.truths and "key_index" in ds.truths[0]:
            report["detection_accuracy"] = float(first.mean())
        elif correct.any():
            report["attention_in_window"] = float(first[correct].mean())
    summary_json(os.path.join(cfg["out"], "report.json"), **report)
    write_resolved(cfg, os.path.join(cfg["out"], "resolved.cfg"))
    print(json.dumps({k: report[k] for k in report if k != "confusion"}))
    return 0


def cmd_attn(args):
    cfg = resolve(args)
    model, ds = _eval_inputs(cfg)
    _, A = predict(model, ds)
    count = len(ds) if cfg["attn_max"] <= 0 else min(cfg["attn_max"], len(ds))
    d = os.path.join(cfg["out"], "attn")
    os.makedirs(d, exist_ok=True)
    rows = []
    for i in range(count):
        export_attention_csv(A[i], os.path.join(d, f"seq_{i}.csv"))
        export_heatmap(A[i], os.path.join(d, f"seq_{i}.pgm"))
        rep = AttentionReport.build(A[i])
        rows.append({"sequence": i, "entropy": rep.row_entropies, "argmax": rep.argmax_locations})
    ent = attention_entropy(A[:count])
    summary_json(os.path.join(d, "entropy.json"), median_entropy=float(np.median(ent)),
                 mean_entropy=float(np.mean(ent)), sequences=rows)
    write_resolved(cfg, os.path.join(cfg["out"], "resolved.cfg"))
    print(json.dumps({"exported": count, "directory": d, "median_entropy": float(np.median(ent))}))
    return 0


def cmd_gradcheck(args):
    worst = run_suite(range(args.seed, args.seed + args.seeds))
    ok = True
    for name, err in worst.items():
        passed = err < TOLERANCE
        ok &= passed
        print(f"{name:20s} {err:.3e} {'ok' if passed else 'FAIL'}")
    return 0 if ok else EXIT_RUNTIME


def _add_keys(p):
    p.add_argument("--config", help="key = value settings file")
    for key, (typ, default, text) in KEYS.items():
        p.add_argument(f"--{key}", metavar=typ.__name__.upper(), help=f"{text} (default: {default})")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="tcattn", description="Temporal contextual attention models on NumPy.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    g = sub.add_parser("gen", help="write a synthetic dataset",
                       epilog="Extra --key value pairs are passed to the task generator.")
    g.add_argument("--task", required=True, choices=sorted(GENERATORS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True)
    for name, text in (("train", "train a model"), ("eval", "evaluate a checkpoint"),
                       ("attn", "export attention matrices")):
        _add_keys(sub.add_parser(name, help=text))
    gc = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    gc.add_argument("--seed", type=int, default=0, help="first seed")
    gc.add_argument("--seeds", type=int, default=10, help="number of seeds")
    return p


def _fail(code, error, detail):
    sys.stderr.write(json.dumps({"error": error, "detail": detail}) + "\n")
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if argv and argv[0] == "gen":
            args, extra = parser.parse_known_args(argv)
        else:
            args, extra = parser.parse_args(argv), []
        if args.command is None:
            raise UsageError("expected a command: gen, train, eval, attn or gradcheck")
        if args.command == "gen":
            return cmd_gen(args, extra)
        return {"train": cmd_train, "eval": cmd_eval, "attn": cmd_attn, "gradcheck": cmd_gradcheck}[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except (DatasetError, CheckpointError, ShapeError) as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except (TrainingError, OSError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, "runtime", str(exc))


if __name__ == "__main__":
    sys.exit(main())
