"""Losses, attention sparsity penalty, optimizers and the training loop."""

import csv
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import dense_backward, dense_forward
from .models import model_backward, model_forward
from .tensor import Rng, ShapeError

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 8
    max_epochs: int = 50
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "mse"
    sparsity_lambda: float = 0.0
    # patience 0 turns early stopping off
    early_stop_min_delta: float = 0.01
    early_stop_patience: int = 0
    seed: int = 0
    validation_fraction: float = 0.1
    # epochs of per-frame encoder/head pretraining before joint training
    # (autoencoders only); 0 skips it
    codec_pretrain_epochs: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.sparsity_lambda < 0:
            raise ValueError("sparsity_lambda must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.codec_pretrain_epochs < 0:
            raise ValueError("codec_pretrain_epochs must be >= 0")

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def val_losses(self):
        return [r.val_loss for r in self.records]

    @property
    def train_losses(self):
        return [r.train_loss for r in self.records]

    def to_csv(self, path, include_timing=False):
        """Write epoch,train_loss,val_loss,seconds.

        Wall time is left blank unless `include_timing` is set, so that
        identical runs produce identical files.
        """
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "seconds"])
            for r in self.records:
                secs = format(r.seconds, ".6f") if include_timing else ""
                w.writerow([r.epoch, format(r.train_loss, ".17g"), format(r.val_loss, ".17g"), secs])


def mse_loss(Yhat, Y):
    """Mean squared error over every element, with its gradient."""
    Yhat = np.asarray(Yhat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Yhat.shape != Y.shape:
        raise ShapeError(f"mse: prediction {Yhat.shape} vs target {Y.shape}")
    diff = Yhat - Y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def cross_entropy_loss(probs, label):
    """Categorical cross-entropy for 1 x K probabilities (or a B x 1 x K stack).

    `label` is an int or an int array of length B. The returned gradient is
    with respect to the pre-softmax logits (``probs - onehot``), averaged
    over the batch.
    """
    probs = np.asarray(probs, dtype=np.float64)
    K = probs.shape[-1]
    labels = np.atleast_1d(np.asarray(label))
    if np.any(labels < 0) or np.any(labels >= K):
        raise ValueError(f"label out of range for {K} classes: {label}")
    flat = probs.reshape(-1, K)
    if flat.shape[0] != labels.size:
        raise ShapeError(f"cross entropy: {flat.shape[0]} rows vs {labels.size} labels")
    rows = np.arange(labels.size)
    picked = np.maximum(flat[rows, labels], np.finfo(np.float64).tiny)
    loss = float(-np.mean(np.log(picked)))
    grad = flat.copy()
    grad[rows, labels] -= 1.0
    grad /= labels.size
    return loss, grad.reshape(probs.shape)


def sparsity_penalty(A, lam):
    """Negative-L2 activity penalty on attention rows.

    ``lam * mean over rows of (-sum_i a_i^2)``: -lam for one-hot rows,
    -lam/n for uniform rows. Stacked inputs average over every row.
    """
    A = np.asarray(A, dtype=np.float64)
    rows = A.size // A.shape[-1]
    penalty = lam * float(-np.sum(A * A)) / rows
    return penalty, (-2.0 * lam / rows) * A


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params, grads, state, config):
    """Update `params` in place and return ``(params, state)``."""
    state.step += 1
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"optimizer: gradient {name} {g.shape} vs parameter {theta.shape}")
        if config.optimizer == "sgd":
            theta -= config.learning_rate * g
            continue
        m = state.m.setdefault(name, np.zeros_like(theta))
        v = state.v.setdefault(name, np.zeros_like(theta))
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**state.step)
        v_hat = v / (1.0 - config.beta2**state.step)
        theta -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return params, state


def early_stop_check(val_losses, min_delta, patience):
    """True iff each of the last `patience` epochs improved the previous best
    validation loss by less than `min_delta` (an improvement of exactly
    `min_delta` counts as real progress)."""
    losses = list(val_losses)
    if patience < 1 or len(losses) <= patience:
        return False
    best = min(losses[: len(losses) - patience])
    for loss in losses[len(losses) - patience:]:
        if best - loss >= min_delta:
            return False
        best = min(best, loss)
    return True


def _split(n_items, fraction, rng):
    order = rng.permutation(n_items)
    n_val = max(1, int(round(fraction * n_items)))
    if n_val >= n_items:
        raise TrainingError(f"dataset of {n_items} sequences is too small to split off validation")
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def batch_objective(model, X, target, mask, config):
    """Loss (task + penalty) and registry gradients for one stacked batch."""
    out, A, caches = model_forward(model, X, mask)
    if config.loss == "mse":
        loss, dout = mse_loss(out, target)
        pre = False
    else:
        loss, dout = cross_entropy_loss(out, target)
        pre = True
    dA = None
    if config.sparsity_lambda > 0:
        pen, dA = sparsity_penalty(A, config.sparsity_lambda)
        loss += pen
    grads = model_backward(model, dout, caches, dA=dA, pre_activation=pre)
    return loss, grads


def evaluate_loss(model, X, target, mask, config, batch_size=256):
    """Objective (including the penalty) averaged over sequences, no gradients."""
    total = 0.0
    for start in range(0, len(X), batch_size):
        sl = slice(start, start + batch_size)
        out, A, _ = model_forward(model, X[sl], None if mask is None else mask[sl])
        if config.loss == "mse":
            loss, _ = mse_loss(out, target[sl])
        else:
            loss, _ = cross_entropy_loss(out, target[sl])
        if config.sparsity_lambda > 0:
            loss += sparsity_penalty(A, config.sparsity_lambda)[0]
        total += loss * len(X[sl])
    return total / len(X)


def pretrain_codec(model, frames, config, rng):
    """Fit encoder and head as a per-frame autoencoder, bypassing attention.

    `frames` is a stack of valid input frames (k x f). Updates `model` in
    place and returns the per-epoch mean reconstruction losses.
    """
    if model.config.kind != "autoencoder":
        raise TrainingError("codec pretraining needs an autoencoder")
    names = ("encoder.W", "encoder.b", "head.W", "head.b")
    sub = {k: model.params[k] for k in names}
    frames = frames[:, None, :]
    state = OptimizerState()
    losses = []
    for _ in range(config.codec_pretrain_epochs):
        order = rng.permutation(len(frames))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            xb = frames[order[start:start + config.batch_size]]
            h, enc_cache = dense_forward(xb, model.encoder, model.config.encoder_activation)
            y, head_cache = dense_forward(h, model.head, model.head_activation)
            loss, dy = mse_loss(y, xb)
            dh, g_head = dense_backward(dy, head_cache)
            _, g_enc = dense_backward(dh, enc_cache)
            grads = {"encoder.W": g_enc["W"], "encoder.b": g_enc["b"], "head.W": g_head["W"], "head.b": g_head["b"]}
            optimizer_step(sub, grads, state, config)
            total += loss * len(xb)
        losses.append(total / len(frames))
    return losses


def train(model, dataset, config):
    """Train a copy of `model` on `dataset` and return ``(best_model, history)``.

    A validation split is carved off by a seeded shuffle; the returned model
    holds the parameters from the epoch with the lowest validation loss.
    """
    if len(dataset) == 0:
        raise TrainingError("empty dataset")
    X, target, mask = dataset.stacked(model.config.kind)
    c = model.config
    if X.shape[1:] != (c.n, c.f):
        raise ShapeError(f"dataset sequences {X.shape[1:]} do not match model (n, f) = ({c.n}, {c.f})")
    rng = Rng(config.seed)
    tr_idx, va_idx = _split(len(X), config.validation_fraction, rng)
    model = model.copy()
    if config.codec_pretrain_epochs > 0:
        train_frames = X[tr_idx] if mask is None else X[tr_idx][mask[tr_idx]]
        pretrain_codec(model, train_frames.reshape(-1, c.f), config, rng)
    state = OptimizerState()
    history = TrainHistory()
    best = model.copy()
    best_val = np.inf
    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = tr_idx[rng.permutation(len(tr_idx))]
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = batch_objective(model, X[idx], target[idx], None if mask is None else mask[idx], config)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            optimizer_step(model.params, grads, state, config)
            total += loss * len(idx)
        train_loss = total / len(order)
        val_loss = evaluate_loss(model, X[va_idx], target[va_idx], None if mask is None else mask[va_idx], config)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.records.append(EpochRecord(epoch, train_loss, val_loss, time.perf_counter() - t0))
        log.debug("epoch %d train %.6f val %.6f", epoch, train_loss, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best = model.copy()
            history.best_epoch = epoch
        if config.early_stop_patience > 0 and early_stop_check(
            history.val_losses, config.early_stop_min_delta, config.early_stop_patience
        ):
            history.stopped_early = True
            break
    return best, history
