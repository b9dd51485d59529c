import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tcattn.gradcheck import check_autoencoder, check_classifier, model_objective
from tcattn.layers import grad_check
from tcattn.models import (
    CheckpointError,
    ConfigError,
    Model,
    ModelConfig,
    expected_param_count,
    load_model,
    model_backward,
    model_forward,
    save_model,
)
from tcattn.contextual import tcl_param_count
from tcattn.tensor import Rng, ShapeError


def randomize(model, seed, scale=0.7):
    rng = Rng(seed)
    for arr in model.params.values():
        arr[...] = rng.normal(0, scale, arr.shape)
    return model


def test_classifier_requires_m1():
    with pytest.raises(ConfigError):
        ModelConfig(kind="classifier", n=5, m=2, f=3, g=2, num_classes=3)


def test_classifier_requires_classes():
    with pytest.raises(ConfigError):
        ModelConfig(kind="classifier", n=5, m=1, f=3, g=2, num_classes=1)


@pytest.mark.parametrize("field", ["n", "m", "f", "g"])
def test_dims_positive(field):
    with pytest.raises(ConfigError):
        ModelConfig(**{field: 0})


def test_ffatt_needs_single_output():
    with pytest.raises(ConfigError):
        ModelConfig(n=5, m=3, attention="ffatt")


def test_from_dict_rejects_unknown():
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"n": 3, "bogus": 1})


def test_trivial_composition_gives_column_mean():
    cfg = ModelConfig(kind="autoencoder", n=4, m=3, f=3, g=3, encoder_activation="linear")
    model = Model.init(cfg, 0)
    model.params["encoder.W"][...] = np.eye(3)
    model.params["encoder.b"][...] = 0
    model.params["head.W"][...] = np.eye(3)
    model.params["head.b"][...] = 0
    for k in ("U", "P", "V", "Q"):
        model.params[f"attention.{k}"][...] = 0
    X = Rng(1).normal(0, 1, (4, 3))
    Y, A, _ = model_forward(model, X)
    assert np.allclose(Y, np.tile(X.mean(axis=0), (3, 1)), atol=1e-15)
    assert np.array_equal(A, np.full((3, 4), 0.25))


@given(st.integers(0, 2**32 - 1))
def test_classifier_simplex(seed):
    cfg = ModelConfig(kind="classifier", n=6, m=1, f=3, g=4, num_classes=5)
    model = randomize(Model.init(cfg, 0), seed, 2.0)
    probs, _, _ = model_forward(model, Rng(seed).normal(0, 2, (6, 3)))
    assert probs.shape == (1, 5)
    assert np.all(probs >= 0) and abs(probs.sum() - 1.0) <= 1e-12


def test_forward_matches_oracle_chain():
    cfg = ModelConfig(kind="autoencoder", n=4, m=4, f=3, g=2)
    model = randomize(Model.init(cfg, 0), 5)
    X = Rng(6).normal(0, 1, (4, 3))
    p = {k: v.tolist() for k, v in model.params.items()}
    H = oracles.dense(X.tolist(), p["encoder.W"], p["encoder.b"], "tanh")
    C, A = oracles.tcl(H, p["attention.U"], p["attention.P"], p["attention.V"], p["attention.Q"])
    Y = oracles.dense(C, p["head.W"], p["head.b"], "linear")
    Y_got, A_got, _ = model_forward(model, X)
    assert np.allclose(Y_got, Y, rtol=0, atol=1e-12)
    assert np.allclose(A_got, A, rtol=0, atol=1e-12)


def test_classifier_matches_oracle_chain():
    cfg = ModelConfig(kind="classifier", n=5, m=1, f=3, g=2, num_classes=4, attention="ffatt")
    model = randomize(Model.init(cfg, 0), 8)
    X = Rng(9).normal(0, 1, (5, 3))
    p = {k: v.tolist() for k, v in model.params.items()}
    H = oracles.dense(X.tolist(), p["encoder.W"], p["encoder.b"], "tanh")
    c, _ = oracles.ffatt(H, p["attention.W"], p["attention.b"], p["attention.w"])
    probs = oracles.dense(c, p["head.W"], p["head.b"], "softmax_rows")
    assert np.allclose(model_forward(model, X)[0], probs, rtol=0, atol=1e-12)


def test_mask_ignored_unless_enabled():
    cfg = ModelConfig(kind="classifier", n=5, m=1, f=2, g=3, num_classes=3)
    model = randomize(Model.init(cfg, 0), 1)
    X = Rng(2).normal(0, 1, (5, 2))
    mask = np.array([True, True, False, False, False])
    assert np.array_equal(model_forward(model, X, mask)[1], model_forward(model, X)[1])
    masked = Model(ModelConfig(**{**cfg.to_dict(), "mask_enabled": True}), model.params)
    assert np.all(model_forward(masked, X, mask)[1][:, 2:] <= 1e-12)


def test_forward_shape_mismatch():
    model = Model.init(ModelConfig(n=5, m=1, f=3, g=2), 0)
    with pytest.raises(ShapeError):
        model_forward(model, np.ones((4, 3)))


def test_zero_loss_gradient_gives_zero_grads():
    model = randomize(Model.init(ModelConfig(n=5, m=2, f=3, g=2), 0), 3)
    out, _, caches = model_forward(model, Rng(0).normal(0, 1, (5, 3)))
    grads = model_backward(model, np.zeros_like(out), caches)
    assert set(grads) == set(model.params)
    assert not any(g.any() for g in grads.values())


def test_stale_cache_rejected():
    model = Model.init(ModelConfig(n=5, m=2, f=3, g=2), 0)
    out, _, caches = model_forward(model, np.ones((5, 3)))
    other = model.copy()
    with pytest.raises(ValueError):
        model_backward(other, np.ones_like(out), caches)


@pytest.mark.parametrize("seed", range(3))
def test_autoencoder_mse_grad_check(seed):
    cfg = ModelConfig(kind="autoencoder", n=5, m=5, f=3, g=2)
    model = randomize(Model.init(cfg, 0), 20 + seed, 0.4)
    rng = Rng(seed)
    X, Y = rng.normal(0, 1, (2, 5, 3)), rng.normal(0, 1, (2, 5, 3))
    f = lambda _: model_objective(model, X, Y, None, 0.0, "mse")[0]
    kinks = lambda _: model_objective(model, X, Y, None, 0.0, "mse")[2]
    grads = model_objective(model, X, Y, None, 0.0, "mse")[1]
    assert grad_check(f, model.params, grads, 1e-5, kinks) < 1e-6


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("attention", ["tcl", "ffatt"])
def test_architecture_grad_checks(seed, attention):
    assert check_autoencoder(Rng(seed), attention) < 1e-6
    assert check_classifier(Rng(seed), attention) < 1e-6


@given(st.integers(1, 12), st.integers(1, 6), st.integers(1, 6), st.integers(1, 8),
       st.sampled_from(["autoencoder", "classifier"]), st.sampled_from(["tcl", "ffatt"]))
def test_registry_completeness(n, m, f, g, kind, attention):
    if kind == "classifier" or attention == "ffatt":
        m = 1
    cfg = ModelConfig(kind=kind, n=n, m=m, f=f, g=g, num_classes=3 if kind == "classifier" else 0, attention=attention)
    model = Model.init(cfg, 0)
    assert model.num_params() == expected_param_count(cfg)
    if attention == "tcl":
        out = f if kind == "autoencoder" else 3
        assert model.num_params() == (f * g + g) + tcl_param_count(m, n, g) + (g * out + out)


def test_init_deterministic():
    cfg = ModelConfig(n=6, m=2, f=3, g=4)
    a, b = Model.init(cfg, 9), Model.init(cfg, 9)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_zero_init_attention_uniform():
    cfg = ModelConfig(n=6, m=2, f=3, g=4)
    A = model_forward(Model.init(cfg, 0), Rng(0).normal(0, 1, (6, 3)))[1]
    # P = Q = 0 but U, V glorot, so attention starts near (not exactly) uniform
    assert np.allclose(A.sum(axis=1), 1.0, atol=1e-12)


def test_save_load_roundtrip(tmp_path):
    cfg = ModelConfig(kind="classifier", n=7, m=1, f=3, g=4, num_classes=3, mask_enabled=True)
    model = randomize(Model.init(cfg, 0), 4)
    path = tmp_path / "ckpt.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == cfg
    assert all(np.array_equal(loaded.params[k], model.params[k]) for k in model.params)
    X = Rng(1).normal(0, 1, (7, 3))
    assert np.array_equal(model_forward(loaded, X)[0], model_forward(model, X)[0])


def test_zero_model_checkpoint_uniform_after_reload(tmp_path):
    cfg = ModelConfig(n=4, m=2, f=2, g=3)
    model = Model.init(cfg, 0)
    for arr in model.params.values():
        arr[...] = 0
    save_model(model, tmp_path / "z.json")
    A = model_forward(load_model(tmp_path / "z.json"), Rng(0).normal(0, 1, (4, 2)))[1]
    assert np.array_equal(A, np.full((2, 4), 0.25))


def test_checkpoint_format(tmp_path):
    save_model(Model.init(ModelConfig(n=3, m=1, f=2, g=2), 0), tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["format_version"] == 1
    assert doc["config"]["n"] == 3
    assert np.array(doc["params"]["attention.U"]).shape == (1, 3)


def test_load_rejects_shape_mismatch(tmp_path):
    save_model(Model.init(ModelConfig(n=3, m=1, f=2, g=2), 0), tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    doc["params"]["attention.U"] = [[0.0, 0.0]]
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="attention.U"):
        load_model(tmp_path / "bad.json")


def test_load_rejects_version(tmp_path):
    (tmp_path / "v.json").write_text(json.dumps({"format_version": 2, "config": {}, "params": {}}))
    with pytest.raises(CheckpointError, match="format_version"):
        load_model(tmp_path / "v.json")


def test_load_rejects_malformed(tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "m.json")


def test_save_refuses_non_finite(tmp_path):
    model = Model.init(ModelConfig(n=3, m=1, f=2, g=2), 0)
    model.params["head.b"][0, 0] = np.nan
    with pytest.raises(CheckpointError):
        save_model(model, tmp_path / "n.json")
