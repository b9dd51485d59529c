"""Time-distributed dense layer, activations and a finite-difference checker."""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_matrix, rng_fill, row_softmax, row_softmax_backward, sum_leading

ACTIVATIONS = ("linear", "tanh", "relu", "softmax_rows")


def activate(z, act):
    if act == "linear":
        return z
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "softmax_rows":
        return row_softmax(z)
    raise ValueError(f"unknown activation {act!r}")


def activate_backward(dy, z, y, act):
    """Gradient w.r.t. the pre-activation. relu'(0) is taken as 0."""
    if act == "linear":
        return dy
    if act == "tanh":
        return dy * (1.0 - y * y)
    if act == "relu":
        return dy * (z > 0.0)
    if act == "softmax_rows":
        return row_softmax_backward(dy, y)
    raise ValueError(f"unknown activation {act!r}")


@dataclass
class DenseParams:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = as_matrix(self.W, "W")
        self.b = as_matrix(self.b, "b")
        if self.W.ndim != 2 or self.b.shape != (1, self.W.shape[1]):
            raise ShapeError(f"dense params: W {self.W.shape} does not match b {self.b.shape}")

    @property
    def d_in(self):
        return self.W.shape[0]

    @property
    def d_out(self):
        return self.W.shape[1]

    @classmethod
    def init(cls, rng, d_in, d_out):
        """Glorot-uniform weights, zero bias."""
        return cls(rng_fill(rng, d_in, d_out, "glorot"), np.zeros((1, d_out)))


@dataclass
class DenseCache:
    X: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    act: str
    params: DenseParams


def dense_forward(X, p, act="linear"):
    """Apply ``act(X W + b)`` to every row (time step) of `X`."""
    X = as_matrix(X, "X")
    if X.shape[-1] != p.d_in:
        raise ShapeError(f"dense: input width {X.shape[-1]} != d_in {p.d_in} (X {X.shape}, W {p.W.shape})")
    Z = X @ p.W + p.b
    Y = activate(Z, act)
    return Y, DenseCache(X, Z, Y, act, p)


def dense_backward(dY, cache, pre_activation=False):
    """Backward pass of :func:`dense_forward`.

    With ``pre_activation=True`` the incoming gradient is taken to be with
    respect to ``X W + b`` already (used for fused softmax/cross-entropy).
    Returns ``(dX, {"W": dW, "b": db})``.
    """
    dY = np.asarray(dY, dtype=np.float64)
    if dY.shape != cache.Y.shape:
        raise ShapeError(f"dense backward: gradient {dY.shape} does not match output {cache.Y.shape}")
    dZ = dY if pre_activation else activate_backward(dY, cache.Z, cache.Y, cache.act)
    W = cache.params.W
    dW = sum_leading(np.swapaxes(cache.X, -1, -2) @ dZ)
    db = sum_leading(dZ.sum(axis=-2, keepdims=True))
    dX = dZ @ W.T
    return dX, {"W": dW, "b": db}


class GradCheckError(ValueError):
    pass


def grad_check(f, params, grads, eps=1e-5, kinks=None):
    """Largest relative error between analytic `grads` and central differences.

    `f` maps a dict of parameter arrays to a scalar. `params` is perturbed in
    place one entry at a time and restored. If `kinks` is given it must map
    the same dict to an array of relu pre-activations; entries whose +/- eps
    perturbation flips the sign of any of them straddle a kink and are
    skipped.

    The error for one entry is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    base_kinks = None if kinks is None else np.asarray(kinks(params)) > 0.0
    worst = 0.0
    for name, theta in params.items():
        g = np.asarray(grads[name])
        if g.shape != theta.shape:
            raise ShapeError(f"grad_check: gradient for {name!r} has shape {g.shape}, parameter {theta.shape}")
        flat = theta.reshape(-1)
        if not np.shares_memory(flat, theta):
            raise GradCheckError(f"parameter {name!r} must be a contiguous array")
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(params)
            kp = None if kinks is None else np.asarray(kinks(params)) > 0.0
            flat[i] = orig - eps
            fm = f(params)
            km = None if kinks is None else np.asarray(kinks(params)) > 0.0
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradCheckError(f"non-finite objective while perturbing {name}[{i}]")
            if kinks is not None and (np.any(kp != base_kinks) or np.any(km != base_kinks)):
                continue
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(1e-8, abs(gflat[i]) + abs(numeric))
            worst = max(worst, err)
    return worst
