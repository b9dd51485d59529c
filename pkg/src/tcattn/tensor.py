"""Dense float64 matrix helpers and the seeded random generator.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Every
operation here accepts a single 2-D matrix or a stack of them with leading
batch axes; the last two axes are always (rows, cols).
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not line up."""


def as_matrix(x, name="x"):
    """Return `x` as a float64 array with at least two axes."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 2:
        raise ShapeError(f"{name} must be at least 2-D, got shape {arr.shape}")
    return arr


def matmul(a, b):
    """Matrix product over the last two axes.

    Raises :class:`ShapeError` naming both shapes when the inner
    dimensions disagree.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def row_softmax(x):
    """Softmax across the last axis with per-row max subtraction."""
    x = as_matrix(x)
    z = x - np.max(x, axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / np.sum(ez, axis=-1, keepdims=True)


def row_softmax_backward(dA, A):
    """Vector-Jacobian product of :func:`row_softmax` given its output `A`."""
    return (dA - np.sum(dA * A, axis=-1, keepdims=True)) * A


def sum_leading(x):
    """Sum a stacked gradient over its leading batch axes down to 2-D."""
    while x.ndim > 2:
        x = x.sum(axis=0)
    return x


class Rng:
    """Seeded generator backed by numpy's PCG64 bit generator.

    PCG64 output for a given seed is fixed across platforms and numpy
    releases (numpy's stream-compatibility policy covers the bit generator
    and the ``random``/``standard_normal``/``integers`` methods used here).
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, lo, hi, size=None):
        return self._gen.uniform(lo, hi, size)

    def normal(self, mu, sigma, size=None):
        return self._gen.normal(mu, sigma, size)

    def integers(self, lo, hi, size=None):
        return self._gen.integers(lo, hi, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def spawn(self):
        """Independent child generator drawn from this stream."""
        return Rng(int(self._gen.integers(0, 2**63 - 1)))


def rng_fill(rng, rows, cols, dist="uniform", **kw):
    """Fill a rows x cols matrix from `rng`.

    dist is one of ``uniform`` (lo, hi), ``normal`` (mu, sigma) or
    ``glorot`` (fan_in, fan_out; defaults to rows, cols).
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"rng_fill: shape must be positive, got ({rows}, {cols})")
    size = (int(rows), int(cols))
    if dist == "uniform":
        return rng.uniform(kw.get("lo", 0.0), kw.get("hi", 1.0), size)
    if dist == "normal":
        return rng.normal(kw.get("mu", 0.0), kw.get("sigma", 1.0), size)
    if dist == "glorot":
        fan_in = kw.get("fan_in", rows)
        fan_out = kw.get("fan_out", cols)
        if fan_in <= 0 or fan_out <= 0:
            raise ValueError("glorot fans must be positive")
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size)
    raise ValueError(f"unknown distribution {dist!r}")
