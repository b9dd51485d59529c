"""Temporal contextual attention and the per-step feed-forward baseline.

The contextual layer relates an input sequence ``H`` (n x g) to an output
sequence ``C`` (m x g) through an attention matrix computed from the whole
of ``H``::

    E = relu(tanh(U H + P) V + Q)      U: m x n, P: m x g, V: g x n, Q: m x n
    A = row_softmax(E)
    C = A H

The baseline scores every time step on its own,
``e_i = tanh(h_i W + b) w``, so its weights never see the rest of the
sequence.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_matrix, rng_fill, row_softmax, row_softmax_backward, sum_leading

# logit written into masked columns; exp underflows to exactly 0
MASK_FILL = -1e30


def tcl_param_count(m, n, g):
    """Number of trainable scalars in a contextual layer: 2mn + gm + gn."""
    if min(m, n, g) < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}, g={g}")
    return 2 * m * n + g * m + g * n


@dataclass
class TclParams:
    U: np.ndarray
    P: np.ndarray
    V: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        for name in ("U", "P", "V", "Q"):
            setattr(self, name, as_matrix(getattr(self, name), name))
        m, n = self.U.shape
        g = self.P.shape[1]
        expected = {"U": (m, n), "P": (m, g), "V": (g, n), "Q": (m, n)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"TclParams: {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def m(self):
        return self.U.shape[0]

    @property
    def n(self):
        return self.U.shape[1]

    @property
    def g(self):
        return self.P.shape[1]

    @property
    def size(self):
        return sum(a.size for a in (self.U, self.P, self.V, self.Q))

    @classmethod
    def init(cls, rng, m, n, g):
        """Glorot-uniform U and V, zero P and Q."""
        return cls(
            U=rng_fill(rng, m, n, "glorot"),
            P=np.zeros((m, g)),
            V=rng_fill(rng, g, n, "glorot"),
            Q=np.zeros((m, n)),
        )

    @classmethod
    def zeros(cls, m, n, g):
        return cls(np.zeros((m, n)), np.zeros((m, g)), np.zeros((g, n)), np.zeros((m, n)))


@dataclass
class TclCache:
    H: np.ndarray
    Z1: np.ndarray
    T1: np.ndarray
    Z2: np.ndarray
    E: np.ndarray
    A: np.ndarray
    mask: np.ndarray
    params: TclParams


def _check_mask(mask, batch_shape, n):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[-1] != n or mask.shape[:-1] not in ((), batch_shape):
        raise ShapeError(f"mask shape {mask.shape} does not match sequence length {n}")
    if not np.all(mask.any(axis=-1)):
        raise ValueError("mask must keep at least one time step")
    return mask


def tcl_forward(H, p, mask=None):
    """Forward pass. Returns ``(C, A, cache)``.

    `H` may carry leading batch axes; `mask` is a boolean vector (or stack)
    over the n input steps where False marks padding that receives no
    attention.
    """
    H = as_matrix(H, "H")
    if H.shape[-2:] != (p.n, p.g):
        raise ShapeError(f"tcl: input {H.shape} does not match (n, g) = ({p.n}, {p.g})")
    mask = _check_mask(mask, H.shape[:-2], p.n)
    Z1 = p.U @ H + p.P
    T1 = np.tanh(Z1)
    Z2 = T1 @ p.V + p.Q
    E = np.maximum(Z2, 0.0)
    if mask is not None:
        E = np.where(mask[..., None, :], E, MASK_FILL)
    A = row_softmax(E)
    C = A @ H
    return C, A, TclCache(H, Z1, T1, Z2, E, A, mask, p)


def tcl_backward(dC, cache, dA=None):
    """Backward pass of :func:`tcl_forward`.

    `dA` is an optional extra gradient arriving directly at the attention
    matrix (e.g. from an activity penalty). Returns ``(dH, grads)`` with
    grads keyed U, P, V, Q. ``H`` feeds both the attention logits and the
    weighted sum, so dH collects both paths.
    """
    p = cache.params
    dC = np.asarray(dC, dtype=np.float64)
    expected = cache.A.shape[:-1] + (p.g,)
    if dC.shape != expected:
        raise ShapeError(f"tcl backward: gradient {dC.shape} does not match output {expected}")
    H, A = cache.H, cache.A
    dA_total = dC @ np.swapaxes(H, -1, -2)
    if dA is not None:
        dA_total = dA_total + dA
    dE = row_softmax_backward(dA_total, A)
    dZ2 = dE * (cache.Z2 > 0.0)
    if cache.mask is not None:
        dZ2 = np.where(cache.mask[..., None, :], dZ2, 0.0)
    dV = sum_leading(np.swapaxes(cache.T1, -1, -2) @ dZ2)
    dQ = sum_leading(dZ2)
    dT1 = dZ2 @ p.V.T
    dZ1 = dT1 * (1.0 - cache.T1 * cache.T1)
    dU = sum_leading(dZ1 @ np.swapaxes(H, -1, -2))
    dP = sum_leading(dZ1)
    dH = np.swapaxes(A, -1, -2) @ dC + p.U.T @ dZ1
    return dH, {"U": dU, "P": dP, "V": dV, "Q": dQ}


@dataclass
class FfAttParams:
    W: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("W", "b", "w"):
            setattr(self, name, as_matrix(getattr(self, name), name))
        a = self.W.shape[1]
        if self.b.shape != (1, a) or self.w.shape != (a, 1):
            raise ShapeError(f"FfAttParams: W {self.W.shape}, b {self.b.shape}, w {self.w.shape} inconsistent")

    @property
    def g(self):
        return self.W.shape[0]

    @property
    def size(self):
        return self.W.size + self.b.size + self.w.size

    @classmethod
    def init(cls, rng, g, a=None):
        a = g if a is None else a
        return cls(rng_fill(rng, g, a, "glorot"), np.zeros((1, a)), rng_fill(rng, a, 1, "glorot"))


@dataclass
class FfAttCache:
    H: np.ndarray
    S: np.ndarray
    alpha: np.ndarray
    mask: np.ndarray
    params: FfAttParams


def ffatt_forward(H, p, mask=None):
    """Per-step scored attention pooling. Returns ``(c, alpha, cache)``, c is 1 x g."""
    H = as_matrix(H, "H")
    if H.shape[-1] != p.g:
        raise ShapeError(f"ffatt: input width {H.shape[-1]} != g {p.g}")
    mask = _check_mask(mask, H.shape[:-2], H.shape[-2])
    S = np.tanh(H @ p.W + p.b)
    e = np.swapaxes(S @ p.w, -1, -2)
    if mask is not None:
        e = np.where(mask[..., None, :], e, MASK_FILL)
    alpha = row_softmax(e)
    c = alpha @ H
    return c, alpha, FfAttCache(H, S, alpha, mask, p)


def ffatt_backward(dc, cache, dalpha=None):
    """Backward pass of :func:`ffatt_forward`. Returns ``(dH, grads)`` keyed W, b, w."""
    p = cache.params
    dc = np.asarray(dc, dtype=np.float64)
    expected = cache.alpha.shape[:-1] + (p.g,)
    if dc.shape != expected:
        raise ShapeError(f"ffatt backward: gradient {dc.shape} does not match output {expected}")
    H, S, alpha = cache.H, cache.S, cache.alpha
    da = dc @ np.swapaxes(H, -1, -2)
    if dalpha is not None:
        da = da + dalpha
    de = row_softmax_backward(da, alpha)
    if cache.mask is not None:
        de = np.where(cache.mask[..., None, :], de, 0.0)
    de_col = np.swapaxes(de, -1, -2)
    dw = sum_leading(np.swapaxes(S, -1, -2) @ de_col)
    dZ = (de_col @ p.w.T) * (1.0 - S * S)
    dW = sum_leading(np.swapaxes(H, -1, -2) @ dZ)
    db = sum_leading(dZ.sum(axis=-2, keepdims=True))
    dH = np.swapaxes(alpha, -1, -2) @ dc + dZ @ p.W.T
    return dH, {"W": dW, "b": db, "w": dw}
