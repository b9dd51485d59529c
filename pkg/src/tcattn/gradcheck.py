"""Finite-difference checks of every differentiable component.

Each check builds a small random instance, reduces the component output to
a scalar (a fixed random projection or the training loss) and compares the
analytic gradients against central differences with :func:`grad_check`.
"""

import numpy as np

from .contextual import FfAttParams, TclParams, ffatt_backward, ffatt_forward, tcl_backward, tcl_forward
from .layers import ACTIVATIONS, DenseParams, dense_backward, dense_forward, grad_check
from .models import Model, ModelConfig, model_backward, model_forward
from .tensor import Rng, row_softmax
from .training import cross_entropy_loss, mse_loss, sparsity_penalty

TOLERANCE = 1e-6
EPS = 1e-5


def _normal(rng, *shape, sigma=1.0):
    return rng.normal(0.0, sigma, shape)


def check_dense(rng):
    worst = 0.0
    for act in ACTIVATIONS:
        X = _normal(rng, 4, 3)
        p = DenseParams(_normal(rng, 3, 2), _normal(rng, 1, 2))
        R = _normal(rng, 4, 2)
        params = {"W": p.W, "b": p.b, "X": X}

        def f(q):
            return float(np.sum(R * dense_forward(q["X"], DenseParams(q["W"], q["b"]), act)[0]))

        def kinks(q):
            return dense_forward(q["X"], DenseParams(q["W"], q["b"]), "linear")[0]

        _, cache = dense_forward(X, p, act)
        dX, g = dense_backward(R, cache)
        grads = {"W": g["W"], "b": g["b"], "X": dX}
        worst = max(worst, grad_check(f, params, grads, EPS, kinks if act == "relu" else None))
    return worst


def random_tcl(rng, m, n, g, scale=0.7):
    return TclParams(
        _normal(rng, m, n, sigma=scale), _normal(rng, m, g, sigma=scale),
        _normal(rng, g, n, sigma=scale), _normal(rng, m, n, sigma=scale),
    )


def check_tcl(rng, masked=False):
    m, n, g = 4, 5, 3
    H = _normal(rng, n, g)
    p = random_tcl(rng, m, n, g)
    mask = None
    if masked:
        mask = np.ones(n, dtype=bool)
        mask[-2:] = False
    R = _normal(rng, m, g)
    R_A = _normal(rng, m, n)

    def objective(q):
        C, A, cache = tcl_forward(q["H"], TclParams(q["U"], q["P"], q["V"], q["Q"]), mask)
        return float(np.sum(R * C) + np.sum(R_A * A)), cache

    params = {"U": p.U, "P": p.P, "V": p.V, "Q": p.Q, "H": H}
    _, cache = objective(params)
    dH, grads = tcl_backward(R, cache, dA=R_A)
    grads = dict(grads, H=dH)
    return grad_check(lambda q: objective(q)[0], params, grads, EPS, lambda q: objective(q)[1].Z2)


def check_ffatt(rng):
    n, g, a = 5, 3, 4
    H = _normal(rng, n, g)
    p = FfAttParams(_normal(rng, g, a), _normal(rng, 1, a), _normal(rng, a, 1))
    R = _normal(rng, 1, g)

    def f(q):
        return float(np.sum(R * ffatt_forward(q["H"], FfAttParams(q["W"], q["b"], q["w"]))[0]))

    params = {"W": p.W, "b": p.b, "w": p.w, "H": H}
    _, _, cache = ffatt_forward(H, p)
    dH, grads = ffatt_backward(R, cache)
    return grad_check(f, params, dict(grads, H=dH), EPS)


def _randomize(model, rng, scale=0.7):
    for arr in model.params.values():
        arr[...] = rng.normal(0.0, scale, arr.shape)


def model_objective(model, X, target, mask, lam, loss):
    """Loss (+ penalty), registry gradients and relu pre-activations for `model`."""
    out, A, caches = model_forward(model, X, mask)
    if loss == "projection":
        value, dout = float(np.sum(target * out)), target
        pre = False
    elif loss == "mse":
        value, dout = mse_loss(out, target)
        pre = False
    else:
        value, dout = cross_entropy_loss(out, target)
        pre = True
    dA = None
    if lam > 0:
        pen, dA = sparsity_penalty(A, lam)
        value += pen
    grads = model_backward(model, dout, caches, dA=dA, pre_activation=pre)
    att = caches["attention"]
    z = att.Z2 if hasattr(att, "Z2") else np.zeros(1)
    return value, grads, z


def _check_model(model, X, target, mask, lam, loss):
    def f(params):
        return model_objective(model, X, target, mask, lam, loss)[0]

    def kinks(params):
        return model_objective(model, X, target, mask, lam, loss)[2]

    _, grads, _ = model_objective(model, X, target, mask, lam, loss)
    return grad_check(f, model.params, grads, EPS, kinks)


def check_autoencoder(rng, attention="tcl"):
    m = 5 if attention == "tcl" else 1
    cfg = ModelConfig(kind="autoencoder", n=5, m=m, f=3, g=2, attention=attention)
    model = Model.init(cfg, seed=int(rng.integers(0, 2**31)))
    _randomize(model, rng)
    X = _normal(rng, 2, 5, 3)
    # a random projection of the output rather than the averaged MSE: the
    # 1/size factor pushes some gradients down to the finite-difference
    # roundoff floor; the loss itself is checked separately
    R = _normal(rng, 2, m, 3)
    return _check_model(model, X, R, None, 0.0, "projection")


def check_classifier(rng, attention="tcl"):
    cfg = ModelConfig(kind="classifier", n=6, m=1, f=3, g=4, num_classes=3, mask_enabled=True, attention=attention)
    model = Model.init(cfg, seed=int(rng.integers(0, 2**31)))
    _randomize(model, rng)
    X = _normal(rng, 3, 6, 3)
    mask = np.ones((3, 6), dtype=bool)
    mask[0, 4:] = False
    mask[2, 5:] = False
    X[~mask] = 0.0
    labels = rng.integers(0, 3, 3)
    return _check_model(model, X, labels, mask, 0.05, "cross_entropy")


def check_mse(rng, eps=EPS):
    Y = _normal(rng, 3, 4)
    params = {"Yhat": _normal(rng, 3, 4)}
    _, grad = mse_loss(params["Yhat"], Y)
    return grad_check(lambda q: mse_loss(q["Yhat"], Y)[0], params, {"Yhat": grad}, eps)


def check_cross_entropy(rng):
    K = 5
    label = int(rng.integers(0, K))
    params = {"logits": _normal(rng, 1, K)}
    _, grad = cross_entropy_loss(row_softmax(params["logits"]), label)
    f = lambda q: cross_entropy_loss(row_softmax(q["logits"]), label)[0]
    return grad_check(f, params, {"logits": grad}, EPS)


def check_sparsity(rng):
    lam = float(rng.uniform(0.01, 1.0))
    params = {"A": row_softmax(_normal(rng, 3, 6))}
    _, grad = sparsity_penalty(params["A"], lam)
    return grad_check(lambda q: sparsity_penalty(q["A"], lam)[0], params, {"A": grad}, EPS)


CHECKS = {
    "dense": check_dense,
    "tcl": check_tcl,
    "tcl_masked": lambda rng: check_tcl(rng, masked=True),
    "ffatt": check_ffatt,
    "autoencoder": check_autoencoder,
    "autoencoder_ffatt": lambda rng: check_autoencoder(rng, "ffatt"),
    "classifier": check_classifier,
    "classifier_ffatt": lambda rng: check_classifier(rng, "ffatt"),
    "mse_loss": check_mse,
    "cross_entropy": check_cross_entropy,
    "sparsity_penalty": check_sparsity,
}


def run_suite(seeds):
    """Worst relative error per check over all `seeds`."""
    worst = {name: 0.0 for name in CHECKS}
    for seed in seeds:
        for name, fn in CHECKS.items():
            worst[name] = max(worst[name], fn(Rng(seed * 1000 + len(name))))
    return worst
