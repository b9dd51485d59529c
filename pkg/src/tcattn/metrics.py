"""Task metrics and attention reports."""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .models import model_forward

ROW_SUM_TOL = 1e-6


@dataclass
class AttentionReport:
    """Attention matrix of one sequence plus derived statistics."""

    A: np.ndarray
    row_entropies: np.ndarray = None
    argmax_locations: np.ndarray = None
    detection_hits: np.ndarray = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        if self.row_entropies is None:
            self.row_entropies = attention_entropy(self.A)
        if self.argmax_locations is None:
            # np.argmax returns the first maximal index
            self.argmax_locations = np.argmax(self.A, axis=-1)

    @classmethod
    def build(cls, A, truth=None):
        """`truth` is a key-frame index (int) or a half-open window (start, end)."""
        rep = cls(A)
        if truth is not None:
            loc = rep.argmax_locations
            if isinstance(truth, (tuple, list)):
                rep.detection_hits = (loc >= truth[0]) & (loc < truth[1])
            else:
                rep.detection_hits = loc == int(truth)
        return rep


def mse_at_horizons(preds, truths, horizon_indices):
    """Test-set MSE at each requested output frame.

    preds/truths are sequences of m x f arrays (or one stacked array).
    """
    P = np.asarray(preds, dtype=np.float64)
    T = np.asarray(truths, dtype=np.float64)
    if P.shape != T.shape:
        raise ValueError(f"predictions {P.shape} vs truths {T.shape}")
    m = P.shape[-2]
    idx = [int(h) for h in horizon_indices]
    for h in idx:
        if not 0 <= h < m:
            raise IndexError(f"horizon index {h} outside [0, {m})")
    sq = (P - T) ** 2
    return np.array([float(np.mean(sq[..., h, :])) for h in idx])


def confusion_matrix(labels, predicted, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if np.any((labels < 0) | (labels >= num_classes)) or np.any((predicted < 0) | (predicted >= num_classes)):
        raise ValueError(f"label outside [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, predicted), 1)
    return cm


def predict(model, dataset, batch_size=256):
    """Stacked model outputs and attention matrices over a dataset."""
    X, _, M = dataset.stacked(model.config.kind)
    outs, atts = [], []
    for s in range(0, len(X), batch_size):
        out, A, _ = model_forward(model, X[s:s + batch_size], M[s:s + batch_size])
        outs.append(out)
        atts.append(A)
    return np.concatenate(outs), np.concatenate(atts)


def classification_report(model, dataset):
    """Accuracy and K x K confusion counts (rows true, columns predicted)."""
    probs, _ = predict(model, dataset)
    predicted = np.argmax(probs[:, 0, :], axis=-1)
    cm = confusion_matrix(dataset.labels, predicted, model.config.num_classes)
    return float(np.trace(cm) / cm.sum()), cm


def attention_entropy(A):
    """Shannon entropy (nats) of every attention row, with 0 ln 0 = 0."""
    A = np.asarray(A, dtype=np.float64)
    if np.any(A < 0) or np.any(np.abs(A.sum(axis=-1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("attention rows must be nonnegative and sum to 1")
    safe = np.where(A > 0, A, 1.0)
    return -np.sum(A * np.log(safe), axis=-1)


def keyframe_detection_accuracy(reports, truth_locations):
    """Fraction of single-row attention reports whose argmax hits the truth."""
    reports = list(reports)
    truth_locations = list(truth_locations)
    if len(reports) != len(truth_locations):
        raise ValueError(f"{len(reports)} reports vs {len(truth_locations)} truths")
    if not reports:
        raise ValueError("no reports")
    hits = 0
    for rep, truth in zip(reports, truth_locations):
        A = rep.A if isinstance(rep, AttentionReport) else np.asarray(rep)
        if A.shape[0] != 1:
            raise ValueError("key-frame detection needs a single attention row (m == 1)")
        hits += int(np.argmax(A[0]) == int(truth))
    return hits / len(reports)


def export_attention_csv(A, path):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in A:
            w.writerow([format(float(v), ".17g") for v in row])


def export_heatmap(A, path):
    """ASCII PGM (P2): width n, height m, pixels scaled by the global max."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    top = float(A.max())
    if top > 0:
        pix = np.floor(255.0 * A / top + 0.5).astype(int)
    else:
        pix = np.zeros(A.shape, dtype=int)
    pix = np.clip(pix, 0, 255)
    lines = ["P2", f"{A.shape[1]} {A.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pgm(path):
    """Parse a P2 file written by :func:`export_heatmap` into an int array."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array([int(t) for t in tokens[4:4 + w * h]]).reshape(h, w)


def summary_json(path, **fields_):
    """Write a report dict; numpy values are converted, NaN becomes null."""

    def clean(v):
        if isinstance(v, np.ndarray):
            return clean(v.tolist())
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return None if not math.isfinite(v) else float(v)
        return v

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(fields_), fh, indent=1, sort_keys=True)
        fh.write("\n")
