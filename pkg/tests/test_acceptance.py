"""Acceptance criteria 1-10, one test each, one PASS/FAIL line each."""

import time

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import CRITERIA
from tcattn.cli import main
from tcattn.contextual import FfAttParams, TclParams, ffatt_forward, tcl_forward, tcl_param_count
from tcattn.experiments import run_classification, run_focus, run_interpolation, run_keyframe
from tcattn.gradcheck import TOLERANCE, run_suite
from tcattn.tensor import Rng, row_softmax
from tcattn.training import early_stop_check, sparsity_penalty


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} {detail}"
    CRITERIA.append(line)
    print(line)
    assert ok, line


def test_criterion_01_gradient_suite():
    t0 = time.perf_counter()
    worst = run_suite(range(10))
    secs = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    ok = all(v < TOLERANCE for v in worst.values()) and secs < 60
    report(1, ok, f"worst {top} {worst[top]:.2e} over {len(worst)} checks x 10 seeds in {secs:.1f}s")


def test_criterion_02_attention_algebra():
    rng = Rng(2024)
    worst_sum, hull_ok, uniform_ok = 0.0, True, True
    for _ in range(100):
        m, n, g = (int(v) for v in rng.integers(1, 9, 3))
        H = rng.normal(0, 2, (n, g))
        scale = rng.uniform(0.1, 3.0)
        p = TclParams(rng.normal(0, scale, (m, n)), rng.normal(0, scale, (m, g)), rng.normal(0, scale, (g, n)),
                      rng.normal(0, scale, (m, n)))
        C, A, _ = tcl_forward(H, p)
        worst_sum = max(worst_sum, float(np.abs(A.sum(axis=1) - 1).max()))
        hull_ok &= bool(np.all(C >= H.min(axis=0) - 1e-12) and np.all(C <= H.max(axis=0) + 1e-12))
        _, A0, _ = tcl_forward(H, TclParams.zeros(m, n, g))
        uniform_ok &= bool(np.array_equal(A0, np.full((m, n), 1.0 / n)))
    counts_ok = tcl_param_count(1, 227, 16) == 4102 and all(
        tcl_param_count(m, n, g) == TclParams.zeros(m, n, g).size
        for m in range(1, 5) for n in range(1, 30, 7) for g in range(1, 20, 6))
    ok = worst_sum <= 1e-9 and hull_ok and uniform_ok and counts_ok
    report(2, ok, f"row-sum err {worst_sum:.1e}, hull {hull_ok}, uniform {uniform_ok}, counts {counts_ok}")


def test_criterion_03_oracle_equivalence():
    rng = Rng(3)
    worst = 0.0
    for _ in range(20):
        m, n, g = (int(v) for v in rng.integers(1, 7, 3))
        H = rng.normal(0, 1, (n, g))
        U, P, V, Q = rng.normal(0, 1, (m, n)), rng.normal(0, 1, (m, g)), rng.normal(0, 1, (g, n)), rng.normal(0, 1, (m, n))
        C, A, _ = tcl_forward(H, TclParams(U, P, V, Q))
        C_ref, A_ref = oracles.tcl(H.tolist(), U.tolist(), P.tolist(), V.tolist(), Q.tolist())
        a = int(rng.integers(1, 7))
        W, b, w = rng.normal(0, 1, (g, a)), rng.normal(0, 1, (1, a)), rng.normal(0, 1, (a, 1))
        c, alpha, _ = ffatt_forward(H, FfAttParams(W, b, w))
        c_ref, a_ref = oracles.ffatt(H.tolist(), W.tolist(), b.tolist(), w.tolist())
        worst = max(worst, *(float(np.abs(np.asarray(x) - np.asarray(y)).max())
                             for x, y in ((C, C_ref), (A, A_ref), (c, c_ref), (alpha, a_ref))))
    report(3, worst <= 1e-12, f"max deviation {worst:.1e} on 20 instances")


def test_criterion_04_keyframe_detection():
    r = run_keyframe(0, "tcl")
    ok = r["detection_accuracy"] >= 0.90 and r["seconds"] < 300
    report(4, ok, f"detection accuracy {r['detection_accuracy']:.3f} (bar 0.90) in {r['seconds']:.1f}s")


def test_criterion_05_interpolation():
    r = run_interpolation(0)
    below_hold = all(h["trained"] < h["hold_last"] for h in r["horizons"].values())
    ratio = r["hole_mse_untrained"] / r["hole_mse"]
    ok = below_hold and ratio >= 5 and r["seconds"] < 600
    per = ", ".join(f"{k}: {h['trained']:.4f} vs hold {h['hold_last']:.4f}" for k, h in r["horizons"].items())
    report(5, ok, f"{per}; untrained/trained {ratio:.1f}x in {r['seconds']:.1f}s")


def test_criterion_06_classification():
    r = run_classification(0)
    ok = r["accuracy"] >= 0.95 and r["attention_in_window"] >= 0.80 and r["seconds"] < 600
    report(6, ok, f"accuracy {r['accuracy']:.3f}, in-window {r['attention_in_window']:.3f}, "
                  f"{r['epochs']} epochs in {r['seconds']:.1f}s")


def test_criterion_07_focus():
    rows = run_focus(range(5))
    wins = sum(r["tcl"] < r["ffatt"] for r in rows)
    tcl_med = float(np.median([r["tcl"] for r in rows]))
    ff_med = float(np.median([r["ffatt"] for r in rows]))
    report(7, wins >= 4, f"tcl sharper in {wins}/5 seeds; median entropy tcl {tcl_med:.4f} vs ffatt {ff_med:.4f}")


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.floats(0.0, 30.0))
def check_sparsity_bounds(seed, n, scale):
    A = row_softmax(Rng(seed).normal(0, scale, (1, n)))
    pen, _ = sparsity_penalty(A, 1.0)
    assert -1.0 - 1e-12 <= pen <= -1.0 / n + 1e-12


def test_criterion_08_sparsity_bound():
    check_sparsity_bounds()
    extremes = all(
        abs(sparsity_penalty(np.eye(1, n), 0.01)[0] / 0.01 + 1.0) <= 1e-12
        and abs(sparsity_penalty(np.full((1, n), 1.0 / n), 0.01)[0] / 0.01 + 1.0 / n) <= 1e-12
        for n in range(1, 300))
    report(8, extremes, "penalty/lambda in [-1, -1/n] on 200 random rows; one-hot and uniform exact to 1e-12")


def test_criterion_09_reproducibility(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["gen", "--task", "keyframe", "--count", "60", "--out", str(data), "--f", "12"]) == 0
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["train", "--data", str(data), "--out", str(out), "--g", "8", "--max_epochs", "5",
                     "--sparsity_lambda", "0.01", "--seed", "3"])
        assert code == 0
        blobs.append(tuple((out / f).read_bytes() for f in ("checkpoint.json", "history.csv")))
    capsys.readouterr()
    report(9, blobs[0] == blobs[1], "checkpoint.json and history.csv byte-identical across two runs")


def test_criterion_10_early_stopping():
    small = [1.0 - 0.005 * k for k in range(11)]
    one_real = list(small)
    one_real[6] -= 0.05
    one_real[7:] = [one_real[6] - 0.001 * k for k in range(1, 5)]
    # 0.5 and 0.25 are exact binary fractions so the boundary improvement is exact
    exact = [0.53, 0.52, 0.51, 0.5] + [0.25] + [0.25] * 9
    exact_done = exact + [0.25]
    # 0.02 - 0.01 == 0.01 in binary64, so this is the literal 0.01 boundary
    hundredth = [0.05, 0.02, 0.01] + [0.01] * 9
    cases = [
        (small, 0.01, 10, True),
        (one_real, 0.01, 10, False),
        (exact, 0.25, 10, False),
        (exact_done, 0.25, 10, True),
        (hundredth, 0.01, 10, False),
        (hundredth + [0.01], 0.01, 10, True),
        ([1.0] * 10, 0.01, 10, False),
        ([1.0] * 11, 0.01, 10, True),
    ]
    got = [early_stop_check(h, d, p) for h, d, p, _ in cases]
    ok = got == [c[3] for c in cases]
    report(10, ok, f"{sum(g == c[3] for g, c in zip(got, cases))}/{len(cases)} hand-built histories")
