"""Autoencoder and classifier built around an attention layer.

Both architectures are ``encoder -> attention -> head``:

* encoder: dense f -> g applied to every time step,
* attention: contextual layer (n -> m steps) or the per-step baseline (m = 1),
* head: dense g -> f per output step (autoencoder) or g -> K with softmax
  (classifier, m = 1).

All parameters live in one flat ``name -> ndarray`` registry; the layer
parameter objects handed to the forward functions are views into it.
"""

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .contextual import (
    FfAttParams,
    TclParams,
    ffatt_backward,
    ffatt_forward,
    tcl_backward,
    tcl_forward,
    tcl_param_count,
)
from .layers import ACTIVATIONS, DenseParams, dense_backward, dense_forward
from .tensor import Rng, ShapeError

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class ModelConfig:
    kind: str = "autoencoder"
    n: int = 10
    m: int = 1
    f: int = 1
    g: int = 8
    num_classes: int = 0
    encoder_activation: str = "tanh"
    decoder_activation: str = "linear"
    mask_enabled: bool = False
    attention: str = "tcl"
    # hidden width of the baseline scorer; 0 means g
    attention_width: int = 0

    def __post_init__(self):
        if self.kind not in ("autoencoder", "classifier"):
            raise ConfigError(f"kind must be autoencoder or classifier, got {self.kind!r}")
        if self.attention not in ("tcl", "ffatt"):
            raise ConfigError(f"attention must be tcl or ffatt, got {self.attention!r}")
        if min(self.n, self.m, self.f, self.g) < 1:
            raise ConfigError(f"dimensions must be >= 1: n={self.n} m={self.m} f={self.f} g={self.g}")
        if self.kind == "classifier":
            if self.m != 1:
                raise ConfigError("classifier requires m == 1")
            if self.num_classes < 2:
                raise ConfigError("classifier requires num_classes >= 2")
        if self.attention == "ffatt" and self.m != 1:
            raise ConfigError("feed-forward attention produces a single context vector; m must be 1")
        for act in (self.encoder_activation, self.decoder_activation):
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def param_shapes(config):
    """Registry layout implied by `config`, in a fixed order."""
    c = config
    shapes = {"encoder.W": (c.f, c.g), "encoder.b": (1, c.g)}
    if c.attention == "tcl":
        shapes.update({
            "attention.U": (c.m, c.n),
            "attention.P": (c.m, c.g),
            "attention.V": (c.g, c.n),
            "attention.Q": (c.m, c.n),
        })
    else:
        a = c.attention_width or c.g
        shapes.update({"attention.W": (c.g, a), "attention.b": (1, a), "attention.w": (a, 1)})
    out = c.f if c.kind == "autoencoder" else c.num_classes
    shapes.update({"head.W": (c.g, out), "head.b": (1, out)})
    return shapes


class Model:
    def __init__(self, config, params):
        self.config = config
        shapes = param_shapes(config)
        if set(params) != set(shapes):
            raise ShapeError(f"parameter names {sorted(params)} do not match {sorted(shapes)}")
        self.params = {}
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ShapeError(f"{name}: shape {arr.shape}, expected {shape}")
            self.params[name] = arr

    @classmethod
    def init(cls, config, seed=0):
        rng = Rng(seed)
        c = config
        params = {}
        enc = DenseParams.init(rng, c.f, c.g)
        params["encoder.W"], params["encoder.b"] = enc.W, enc.b
        if c.attention == "tcl":
            t = TclParams.init(rng, c.m, c.n, c.g)
            params.update({"attention.U": t.U, "attention.P": t.P, "attention.V": t.V, "attention.Q": t.Q})
        else:
            a = FfAttParams.init(rng, c.g, c.attention_width or c.g)
            params.update({"attention.W": a.W, "attention.b": a.b, "attention.w": a.w})
        out = c.f if c.kind == "autoencoder" else c.num_classes
        head = DenseParams.init(rng, c.g, out)
        params["head.W"], params["head.b"] = head.W, head.b
        return cls(config, params)

    @property
    def encoder(self):
        return DenseParams(self.params["encoder.W"], self.params["encoder.b"])

    @property
    def attention(self):
        p = self.params
        if self.config.attention == "tcl":
            return TclParams(p["attention.U"], p["attention.P"], p["attention.V"], p["attention.Q"])
        return FfAttParams(p["attention.W"], p["attention.b"], p["attention.w"])

    @property
    def head(self):
        return DenseParams(self.params["head.W"], self.params["head.b"])

    @property
    def head_activation(self):
        return self.config.decoder_activation if self.config.kind == "autoencoder" else "softmax_rows"

    def num_params(self):
        return sum(a.size for a in self.params.values())

    def copy(self):
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})


def expected_param_count(config):
    c = config
    enc = c.f * c.g + c.g
    if c.attention == "tcl":
        att = tcl_param_count(c.m, c.n, c.g)
    else:
        a = c.attention_width or c.g
        att = c.g * a + 2 * a
    out = c.f if c.kind == "autoencoder" else c.num_classes
    return enc + att + c.g * out + out


def model_forward(model, X, mask=None):
    """Run the model on one sequence (n x f) or a batch (B x n x f).

    Returns ``(out, A, caches)``: out is m x f reconstructions or 1 x K class
    probabilities, A the m x n attention matrix. The mask is ignored unless
    the config enables masking.
    """
    c = model.config
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2 or X.shape[-2:] != (c.n, c.f):
        raise ShapeError(f"model input {X.shape} does not match (n, f) = ({c.n}, {c.f})")
    if not c.mask_enabled:
        mask = None
    H, enc_cache = dense_forward(X, model.encoder, c.encoder_activation)
    if c.attention == "tcl":
        C, A, att_cache = tcl_forward(H, model.attention, mask)
    else:
        C, A, att_cache = ffatt_forward(H, model.attention, mask)
    out, head_cache = dense_forward(C, model.head, model.head_activation)
    return out, A, {"encoder": enc_cache, "attention": att_cache, "head": head_cache}


def model_backward(model, loss_grad, caches, dA=None, pre_activation=False):
    """Gradients for every registry entry.

    `loss_grad` is the gradient w.r.t. the model output, or w.r.t. the head's
    pre-activation when ``pre_activation`` is set (fused softmax +
    cross-entropy). `dA` adds a gradient directly at the attention matrix.
    """
    if caches["head"].params.W is not model.params["head.W"]:
        raise ValueError("caches were not produced by this model's current parameters")
    dC, g_head = dense_backward(loss_grad, caches["head"], pre_activation=pre_activation)
    if model.config.attention == "tcl":
        dH, g_att = tcl_backward(dC, caches["attention"], dA)
    else:
        dH, g_att = ffatt_backward(dC, caches["attention"], dA)
    _, g_enc = dense_backward(dH, caches["encoder"])
    grads = {f"encoder.{k}": v for k, v in g_enc.items()}
    grads.update({f"attention.{k}": v for k, v in g_att.items()})
    grads.update({f"head.{k}": v for k, v in g_head.items()})
    return grads


def _format_matrix(a):
    rows = ("[" + ",".join(format(float(v), ".17g") for v in row) + "]" for row in a)
    return "[" + ",".join(rows) + "]"


def save_model(model, path):
    """Write a JSON checkpoint; floats carry 17 significant digits."""
    for name, arr in model.params.items():
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"refusing to save non-finite parameter {name}")
    config = json.dumps(model.config.to_dict(), sort_keys=True)
    params = ",\n".join(f'    "{name}": {_format_matrix(arr)}' for name, arr in model.params.items())
    text = f'{{\n  "format_version": {FORMAT_VERSION},\n  "config": {config},\n  "params": {{\n{params}\n  }}\n}}\n'
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: malformed checkpoint JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {doc.get('format_version') if isinstance(doc, dict) else None!r}")
    try:
        config = ModelConfig.from_dict(doc["config"])
        raw = doc["params"]
    except (KeyError, TypeError, ConfigError) as exc:
        raise CheckpointError(f"{path}: bad header: {exc}") from exc
    shapes = param_shapes(config)
    if set(raw) != set(shapes):
        raise CheckpointError(f"{path}: parameter names {sorted(raw)} do not match config {sorted(shapes)}")
    params = {}
    for name, shape in shapes.items():
        rows = raw[name]
        if not isinstance(rows, list) or len(rows) != shape[0] or any(
            not isinstance(r, list) or len(r) != shape[1] for r in rows
        ):
            raise CheckpointError(f"{path}: {name} does not match declared shape {shape}")
        params[name] = np.array(rows, dtype=np.float64)
    return Model(config, params)
