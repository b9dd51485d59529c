"""Synthetic-task experiments shared by scripts/ and the acceptance tests.

Each ``run_*`` function builds its dataset, trains, evaluates and returns a
plain dict of measurements plus wall time.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import gen_actions, gen_interpolation, gen_keyframe
from .metrics import AttentionReport, attention_entropy, classification_report, keyframe_detection_accuracy, predict
from .models import Model, ModelConfig
from .training import TrainConfig, train


@dataclass
class KeyframeSetup:
    train_count: int = 600
    test_count: int = 200
    frames: int = 10
    f: int = 32
    g: int = 32
    encoder_activation: str = "linear"
    style: float = 0.3
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=32, max_epochs=300, learning_rate=3e-3, sparsity_lambda=0.01, codec_pretrain_epochs=20,
    ))


def run_keyframe(seed=0, attention="tcl", setup=None):
    s = setup or KeyframeSetup()
    t0 = time.perf_counter()
    ds = gen_keyframe(seed, s.train_count + s.test_count, frames=s.frames, f=s.f, style=s.style)
    tr, te = ds.split(s.train_count)
    cfg = ModelConfig(kind="autoencoder", n=s.frames, m=1, f=s.f, g=s.g,
                      encoder_activation=s.encoder_activation, attention=attention)
    model, history = train(Model.init(cfg, seed), tr, replace(s.train, seed=seed))
    out, A = predict(model, te)
    _, T, _ = te.stacked()
    truth = [t["key_index"] for t in te.truths]
    return {
        "detection_accuracy": keyframe_detection_accuracy([AttentionReport(a) for a in A], truth),
        "median_entropy": float(np.median(attention_entropy(A))),
        "test_mse": float(np.mean((out - T) ** 2)),
        "best_epoch": history.best_epoch,
        "seconds": time.perf_counter() - t0,
    }


def run_focus(seeds=range(5), setup=None):
    """Median attention entropy of the contextual layer vs the baseline, per seed."""
    rows = []
    for seed in seeds:
        tcl = run_keyframe(seed, "tcl", setup)
        ff = run_keyframe(seed, "ffatt", setup)
        rows.append({"seed": seed, "tcl": tcl["median_entropy"], "ffatt": ff["median_entropy"],
                     "tcl_detection": tcl["detection_accuracy"], "ffatt_detection": ff["detection_accuracy"]})
    return rows


@dataclass
class InterpolationSetup:
    train_count: int = 400
    test_count: int = 100
    f: int = 8
    g: int = 16
    horizons: tuple = (10, 30, 59)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=8, max_epochs=60, learning_rate=3e-3))


def run_interpolation(seed=0, setup=None):
    """In-hole MSE of the trained model against hold-last-frame and the untrained model."""
    s = setup or InterpolationSetup()
    t0 = time.perf_counter()
    ds = gen_interpolation(seed, s.train_count + s.test_count, f=s.f)
    tr, te = ds.split(s.train_count)
    lo, hi = te.truths[0]["hole_start"], te.truths[0]["hole_end"]
    cfg = ModelConfig(kind="autoencoder", n=ds.n, m=ds.n, f=s.f, g=s.g)
    untrained = Model.init(cfg, seed)
    model, history = train(untrained, tr, replace(s.train, seed=seed))
    _, T, _ = te.stacked()
    X = np.stack(te.inputs)
    P = predict(model, te)[0]
    P0 = predict(untrained, te)[0]
    hold = np.repeat(X[:, lo - 1:lo, :], hi - lo, axis=1)

    def hole_mse(pred, k=None):
        if k is None:
            return float(np.mean((pred[:, lo:hi] - T[:, lo:hi]) ** 2))
        return float(np.mean((pred[:, lo + k] - T[:, lo + k]) ** 2))

    return {
        "horizons": {k: {"trained": hole_mse(P, k), "hold_last": float(np.mean((hold[:, k] - T[:, lo + k]) ** 2)),
                         "untrained": hole_mse(P0, k)} for k in s.horizons},
        "hole_mse": hole_mse(P),
        "hole_mse_untrained": hole_mse(P0),
        "hole_mse_hold_last": float(np.mean((hold - T[:, lo:hi]) ** 2)),
        "best_epoch": history.best_epoch,
        "seconds": time.perf_counter() - t0,
    }


@dataclass
class ClassificationSetup:
    train_count: int = 1800
    test_count: int = 450
    g: int = 16
    encoder_activation: str = "relu"
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=17, max_epochs=200, learning_rate=3e-3, loss="cross_entropy", sparsity_lambda=0.01,
        early_stop_min_delta=0.01, early_stop_patience=10,
    ))


def run_classification(seed=0, setup=None):
    """Test accuracy and how often attention peaks inside the motif of correctly classified sequences."""
    s = setup or ClassificationSetup()
    t0 = time.perf_counter()
    ds = gen_actions(seed, s.train_count + s.test_count)
    tr, te = ds.split(s.train_count)
    cfg = ModelConfig(kind="classifier", n=ds.n, m=1, f=ds.f, g=s.g, num_classes=ds.num_classes,
                      mask_enabled=True, encoder_activation=s.encoder_activation)
    model, history = train(Model.init(cfg, seed), tr, replace(s.train, seed=seed))
    acc, cm = classification_report(model, te)
    probs, A = predict(model, te)
    correct = np.argmax(probs[:, 0], axis=-1) == np.asarray(te.labels)
    hits = np.array([AttentionReport.build(a, (t["motif_start"], t["motif_end"])).detection_hits[0]
                     for a, t in zip(A, te.truths)])
    return {
        "accuracy": acc,
        "confusion": cm,
        "attention_in_window": float(hits[correct].mean()) if correct.any() else 0.0,
        "epochs": len(history.records),
        "stopped_early": history.stopped_early,
        "seconds": time.perf_counter() - t0,
    }
