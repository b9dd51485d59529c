"""Plain-Python reference implementations, written loop by loop.

These share no code with the package; tests compare against them.
"""

import math


def matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            s = 0.0
            for k in range(inner):
                s += a[i][k] * b[k][j]
            out[i][j] = s
    return out


def softmax_row(row):
    top = max(row)
    ex = [math.exp(v - top) for v in row]
    total = sum(ex)
    return [v / total for v in ex]


def act(name, z):
    if name == "linear":
        return z
    if name == "tanh":
        return math.tanh(z)
    if name == "relu":
        return z if z > 0 else 0.0
    raise ValueError(name)


def dense(X, W, b, name):
    Z = matmul(X, W)
    Z = [[z + b[0][j] for j, z in enumerate(row)] for row in Z]
    if name == "softmax_rows":
        return [softmax_row(row) for row in Z]
    return [[act(name, z) for z in row] for row in Z]


def tcl(H, U, P, V, Q, mask=None):
    """Returns (C, A) computed entry by entry."""
    n, g, m = len(H), len(H[0]), len(U)
    A, C = [], []
    for t in range(m):
        t1 = []
        for k in range(g):
            z = P[t][k]
            for i in range(n):
                z += U[t][i] * H[i][k]
            t1.append(math.tanh(z))
        e = []
        for i in range(n):
            z = Q[t][i]
            for k in range(g):
                z += t1[k] * V[k][i]
            e.append(max(z, 0.0))
        if mask is not None:
            e = [v if mask[i] else -1e30 for i, v in enumerate(e)]
        a = softmax_row(e)
        A.append(a)
        C.append([sum(a[i] * H[i][k] for i in range(n)) for k in range(g)])
    return C, A


def ffatt(H, W, b, w):
    """Returns (c, alpha) with one scalar score per time step."""
    n, g, width = len(H), len(H[0]), len(W[0])
    scores = []
    for i in range(n):
        s = 0.0
        for j in range(width):
            z = b[0][j]
            for k in range(g):
                z += H[i][k] * W[k][j]
            s += math.tanh(z) * w[j][0]
        scores.append(s)
    alpha = softmax_row(scores)
    c = [sum(alpha[i] * H[i][k] for i in range(n)) for k in range(g)]
    return [c], [alpha]
