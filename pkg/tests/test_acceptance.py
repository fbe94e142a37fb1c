"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured quantity.

The pooling large-p approximation criterion (2b) asserts a tolerance a
Gaussian-weighted power mean cannot meet at p=64 (the gap to the max
scales like 1 - G^(1/p) ~ 2e-2 for a 2x2 window); it is implemented
exactly as specified and is expected to fail with the measured gap.
"""

import csv
import math
import time

import numpy as np
import pytest

from lpnet.cli import main
from lpnet.data import (
    FormatError,
    SplitSpec,
    build_validation_split,
    grayscale_to_rgb32,
    read_container,
    read_idx,
    write_container,
    write_idx,
)
from lpnet.kernels import gaussian_kernel
from lpnet.layers import Conv2d, Linear, LpPool, SubtractiveNorm, softmax_nll
from lpnet.model import ModelConfig, build_model
from lpnet.preprocess import preprocess_images
from lpnet.synthetic import grayscale_digits, street_digits
from lpnet.training import TrainConfig, evaluate, train_epoch

from straightline import straight_line_forward

#: Reduced model used by the desk-scale learning criteria.
REDUCED = dict(pooling_p=2.0, multi_stage=True, stage1_features=8,
               stage2_features=64, hidden_units=20)

#: Desk-scale experiment scale for the sweep / MS-vs-SS properties.
EXPERIMENT_SCALE = dict(difficulty=0.7, n_train=2500, n_val=2000, epochs=5,
                        seeds=(0, 1, 2))


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# --- shared fixtures -------------------------------------------------------

@pytest.fixture(scope="session")
def street_containers(tmp_path_factory):
    """Raw containers for the experiment-level criteria."""
    root = tmp_path_factory.mktemp("street")
    scale = EXPERIMENT_SCALE
    images, labels = street_digits(scale["n_train"], seed=30,
                                   difficulty=scale["difficulty"])
    write_container(root / "train.cnd", images, labels)
    images, labels = street_digits(scale["n_val"], seed=31,
                                   difficulty=scale["difficulty"])
    write_container(root / "val.cnd", images, labels)
    return root


def fd_check(forward, params, upstream, step=1e-5):
    """Worst relative error between backward results and central FDs."""
    worst = 0.0
    for arr, grad in params:
        flat = arr.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(np.sum(upstream * forward()))
            flat[i] = orig - step
            lo = float(np.sum(upstream * forward()))
            flat[i] = orig
            fd = (hi - lo) / (2 * step)
            worst = max(worst, abs(fd - gflat[i]) / max(1.0, abs(fd), abs(gflat[i])))
    return worst


# --- criterion 1: gradient correctness -------------------------------------

def test_criterion_1_gradient_correctness():
    start = time.time()
    worst_layer = 0.0

    rng = np.random.default_rng(0)
    # Convolution: 20 random configurations.
    for trial in range(20):
        cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        h = int(rng.integers(k, k + 3))
        w = int(rng.integers(k, k + 3))
        conv = Conv2d(rng.normal(size=(cout, cin, k, k)), rng.normal(size=cout))
        x = rng.normal(size=(cin, h, w))
        up = rng.normal(size=(cout, h - k + 1, w - k + 1))
        g = conv.backward(x, up)
        worst_layer = max(worst_layer, fd_check(
            lambda: conv.forward(x),
            [(x, g.input), (conv.weight, g.weight), (conv.bias, g.bias)], up))

    # Lp pooling: 20 configurations across exponents.
    for trial in range(20):
        p = (1.0, 2.0, 4.0, 12.0)[trial % 4]
        k = int(rng.integers(2, 4))
        stride = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        pool = LpPool(p, gaussian_kernel(k, float(rng.uniform(0.3, 1.5))), stride)
        mag = rng.uniform(0.1, 1.0, size=(2, 5, 5))
        x = mag * np.where(rng.random((2, 5, 5)) < 0.5, -1.0, 1.0)
        out = pool.forward(x)
        up = rng.normal(size=out.shape)
        g = pool.backward(x, out, up)
        worst_layer = max(worst_layer, fd_check(
            lambda: pool.forward(x), [(x, g.input)], up))

    # Subtractive normalization: 20 configurations.
    for trial in range(20):
        k = (3, 5)[trial % 2]
        norm = SubtractiveNorm(gaussian_kernel(k))
        x = rng.normal(size=(1, 6, 6))
        up = rng.normal(size=(1, 6, 6))
        g = norm.backward(up)
        worst_layer = max(worst_layer, fd_check(
            lambda: norm.forward(x), [(x, g.input)], up))

    # Tanh and linear: 20 configurations each.
    for trial in range(20):
        x = rng.normal(size=(3, 4))
        up = rng.normal(size=(3, 4))
        grad = up * (1.0 - np.tanh(x) ** 2)
        worst_layer = max(worst_layer, fd_check(
            lambda: np.tanh(x), [(x, grad)], up))

        nin, nout = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        lin = Linear(rng.normal(size=(nout, nin)), rng.normal(size=nout))
        v = rng.normal(size=nin)
        up = rng.normal(size=nout)
        g = lin.backward(v, up)
        worst_layer = max(worst_layer, fd_check(
            lambda: lin.forward(v),
            [(v, g.input), (lin.weight, g.weight), (lin.bias, g.bias)], up))

    # End-to-end reduced model: every parameter.
    model = build_model(ModelConfig(pooling_p=2.0, multi_stage=True,
                                    stage1_features=2, stage2_features=4,
                                    hidden_units=4, seed=3))
    x = rng.uniform(-1, 1, size=(3, 32, 32))
    target = 7
    logits, _, cache = model.forward(x, target)
    _, loss_grad = softmax_nll(logits, target)
    grads = model.backward(cache, loss_grad)

    def energy():
        _, e, _ = model.forward(x, target)
        return e

    worst_e2e = 0.0
    step = 1e-5
    for name, w in model.parameters().items():
        flat = w.ravel()
        g = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = energy()
            flat[i] = orig - step
            lo = energy()
            flat[i] = orig
            fd = (hi - lo) / (2 * step)
            worst_e2e = max(worst_e2e, abs(fd - g[i]) / max(1.0, abs(fd), abs(g[i])))

    elapsed = time.time() - start
    ok = worst_layer <= 1e-6 and worst_e2e <= 1e-5 and elapsed < 120
    report("criterion 1 gradient correctness", ok,
           f"layers {worst_layer:.2e} (tol 1e-6), end-to-end {worst_e2e:.2e} "
           f"(tol 1e-5), {elapsed:.0f}s (< 120s)")
    assert worst_layer <= 1e-6
    assert worst_e2e <= 1e-5
    assert elapsed < 120


# --- criterion 2: pooling special cases -------------------------------------

def test_criterion_2a_p1_is_gaussian_average():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 4))
        kern = gaussian_kernel(k, float(rng.uniform(0.3, 2.0)))
        pool = LpPool(1.0, kern, (1, 1))
        x = rng.uniform(-1, 1, size=(1, 4, 4))
        out = pool.forward(x)
        from lpnet.kernels import correlate2d_valid
        expected = correlate2d_valid(np.abs(x), kern.weights, (1, 1))
        worst = max(worst, float(np.max(np.abs(out - expected))))
    report("criterion 2a p=1 equals Gaussian averaging of |I|", worst <= 1e-12,
           f"max deviation {worst:.2e} (tol 1e-12)")
    assert worst <= 1e-12


def test_criterion_2b_p64_approximates_max():
    # As specified: p=64 pooling within 1e-3 of the p=inf result on
    # [-1, 1] inputs. A weighted power mean approaches the max like
    # max * G(argmax)^(1/p), leaving a ~2e-2 gap at p=64 for a 2x2
    # window, so this tolerance is not attainable; the assertion is kept
    # verbatim and the measured gap is reported.
    rng = np.random.default_rng(2)
    kern = gaussian_kernel(2)
    p64 = LpPool(64.0, kern, (2, 2))
    pinf = LpPool(math.inf, kern, (2, 2))
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(-1, 1, size=(2, 8, 8))
        worst = max(worst, float(np.max(np.abs(p64.forward(x) - pinf.forward(x)))))
    ok = worst <= 1e-3
    report("criterion 2b p=64 within 1e-3 of p=inf", ok,
           f"max gap {worst:.2e} (tol 1e-3; analytic bound "
           f"1-0.25^(1/64) = {1 - 0.25 ** (1 / 64):.2e})")
    assert worst <= 1e-3, (
        f"measured gap {worst:.3e} exceeds 1e-3: a Gaussian-weighted power "
        f"mean converges to the window max like max*G^(1/p); at p=64 with "
        f"2x2 weights 0.25 the gap is ~{1 - 0.25 ** (1 / 64):.2e} by "
        f"construction, and meeting 1e-3 would need p >= "
        f"{math.log(0.25) / math.log(0.999):.0f}")


def test_criterion_2c_monotone_in_p():
    rng = np.random.default_rng(3)
    violations = 0
    for _ in range(1000):
        k = int(rng.integers(2, 4))
        kern = gaussian_kernel(k, float(rng.uniform(0.3, 2.0)))
        x = rng.uniform(-1, 1, size=(1, k, k))
        ps = sorted(rng.uniform(1, 50, size=3).tolist()) + [math.inf]
        outs = [LpPool(p, kern, (1, 1)).forward(x).ravel()[0] for p in ps]
        if any(lo > hi + 1e-12 for lo, hi in zip(outs, outs[1:])):
            violations += 1
    report("criterion 2c monotonicity in p", violations == 0,
           f"{violations}/1000 windows violated")
    assert violations == 0


# --- criterion 3: numerical robustness --------------------------------------

def test_criterion_3_p32_robustness():
    rng = np.random.default_rng(4)
    pool = LpPool(32.0, gaussian_kernel(2), (2, 2))
    bad = 0
    for _ in range(50):
        x = rng.uniform(-1e3, 1e3, size=(2, 8, 8))
        out = pool.forward(x)
        g = pool.backward(x, out, rng.normal(size=out.shape))
        if not (np.isfinite(out).all() and np.isfinite(g.input).all()):
            bad += 1
    report("criterion 3 p=32 robustness at |x| <= 1e3", bad == 0,
           f"{bad}/50 trials produced NaN/Inf")
    assert bad == 0


# --- criterion 4: oracle equivalence ----------------------------------------

def test_criterion_4_oracle_equivalence():
    cfg = ModelConfig(pooling_p=2.0, multi_stage=True, stage1_features=2,
                      stage2_features=4, hidden_units=4, seed=5)
    model = build_model(cfg)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        x = rng.uniform(-1, 1, size=(3, 32, 32))
        logits, _, _ = model.forward(x)
        expected = straight_line_forward(model, x)
        worst = max(worst, float(np.max(np.abs(logits - expected))))
    report("criterion 4 oracle equivalence", worst <= 1e-10,
           f"max |logit diff| {worst:.2e} over 50 inputs (tol 1e-10)")
    assert worst <= 1e-10


# --- criterion 5: split fidelity --------------------------------------------

def test_criterion_5_split_fidelity():
    rng = np.random.default_rng(7)
    train_labels = rng.integers(0, 10, size=73_257).astype(np.uint8)
    extra_labels = rng.integers(0, 10, size=100_000).astype(np.uint8)
    split = build_validation_split(train_labels, extra_labels, SplitSpec(seed=1))
    val_labels = np.concatenate([train_labels[split.val_train],
                                 extra_labels[split.val_extra]])
    histogram = np.bincount(val_labels, minlength=10)
    disjoint = (not set(split.val_train) & set(split.rest_train)
                and not set(split.val_extra) & set(split.rest_extra))
    exhaustive = (split.val_train.size + split.rest_train.size == train_labels.size
                  and split.val_extra.size + split.rest_extra.size == extra_labels.size)
    ok = val_labels.size == 6000 and (histogram == 600).all() and disjoint \
        and exhaustive
    report("criterion 5 split fidelity", ok,
           f"{val_labels.size} samples, per-class {histogram.min()}..{histogram.max()}, "
           f"disjoint={disjoint}, exhaustive={exhaustive}")
    assert ok


# --- criterion 6: desk-scale learning ---------------------------------------

def test_criterion_6a_idx_digit_set(tmp_path):
    start = time.time()
    images, labels = grayscale_digits(10_000, seed=101)
    write_idx(tmp_path / "train-images.idx", images)
    write_idx(tmp_path / "train-labels.idx", labels)
    images, labels = grayscale_digits(2_000, seed=102)
    write_idx(tmp_path / "test-images.idx", images)
    write_idx(tmp_path / "test-labels.idx", labels)

    train_x = preprocess_images(grayscale_to_rgb32(read_idx(tmp_path / "train-images.idx")))
    train_y = read_idx(tmp_path / "train-labels.idx")
    test_x = preprocess_images(grayscale_to_rgb32(read_idx(tmp_path / "test-images.idx")))
    test_y = read_idx(tmp_path / "test-labels.idx")

    model = build_model(ModelConfig(seed=0, **REDUCED))
    tc = TrainConfig(lr0=0.01, lr_decay=1e-5, l2=1e-5, epochs=5, seed=0)
    step = 0
    accuracy = 0.0
    epochs_used = 0
    for epoch in range(tc.epochs):
        _, step = train_epoch(model, train_x, train_y, tc, epoch, step)
        epochs_used = epoch + 1
        accuracy = evaluate(model, test_x, test_y).accuracy
        if accuracy >= 0.90:
            break
    elapsed = time.time() - start
    ok = accuracy >= 0.90 and elapsed < 1800
    report("criterion 6a IDX digit set", ok,
           f"test accuracy {accuracy:.4f} after {epochs_used} epoch(s), "
           f"{elapsed:.0f}s (< 1800s)")
    assert accuracy >= 0.90
    assert elapsed < 1800


def test_criterion_6b_street_digit_fixture(tmp_path):
    images, labels = street_digits(10_000, seed=40, difficulty=0.7)
    write_container(tmp_path / "train.cnd", images, labels)
    images, labels = street_digits(2_000, seed=41, difficulty=0.7)
    write_container(tmp_path / "val.cnd", images, labels)

    train_images, train_y = read_container(tmp_path / "train.cnd")
    val_images, val_y = read_container(tmp_path / "val.cnd")
    train_x = preprocess_images(train_images)
    val_x = preprocess_images(val_images)

    model = build_model(ModelConfig(seed=0, **REDUCED))
    tc = TrainConfig(lr0=0.01, lr_decay=1e-5, l2=1e-5, epochs=20, seed=0)
    step = 0
    accuracy = 0.0
    epochs_used = 0
    for epoch in range(tc.epochs):
        _, step = train_epoch(model, train_x, train_y, tc, epoch, step)
        epochs_used = epoch + 1
        accuracy = evaluate(model, val_x, val_y).accuracy
        if accuracy >= 0.70:
            break
    report("criterion 6b street-digit fixture", accuracy >= 0.70,
           f"validation accuracy {accuracy:.4f} after {epochs_used} epoch(s) "
           f"(target 0.70 within 20)")
    assert accuracy >= 0.70


# --- criterion 7: pooling-order property ------------------------------------

def test_criterion_7_pooling_order(street_containers, tmp_path):
    scale = EXPERIMENT_SCALE
    out = tmp_path / "sweep"
    rc = main(["sweep", "--data", str(street_containers / "train.cnd"),
               "--val", str(street_containers / "val.cnd"),
               "--p-list", "1,2,4,inf",
               "--seeds", ",".join(str(s) for s in scale["seeds"]),
               "--epochs", str(scale["epochs"]),
               "--stage1-features", "8", "--stage2-features", "64",
               "--hidden-units", "20", "--seed", "0",
               "--out-dir", str(out), "--quiet"])
    assert rc == 0
    with open(out / "sweep.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 4 * len(scale["seeds"])
    errors: dict[str, list[float]] = {}
    for row in rows:
        errors.setdefault(row["p"], []).append(float(row["val_error"]))
    medians = {p: float(np.median(v)) for p, v in errors.items()}
    good = max(medians["2"], medians["4"])
    bad = min(medians["1"], medians["inf"])
    ok = good < bad
    report("criterion 7 pooling order", ok,
           "medians " + " ".join(f"p={p}:{medians[p]:.4f}"
                                 for p in ("1", "2", "4", "inf"))
           + f" -> max(p2,p4)={good:.4f} < min(p1,pinf)={bad:.4f}: {ok}")
    assert ok, f"medians {medians}"


# --- criterion 8: multi-stage vs single-stage -------------------------------

def test_criterion_8_ms_vs_ss(street_containers, tmp_path):
    scale = EXPERIMENT_SCALE
    out = tmp_path / "compare"
    rc = main(["compare-ms-ss", "--data", str(street_containers / "train.cnd"),
               "--val", str(street_containers / "val.cnd"),
               "--seeds", ",".join(str(s) for s in scale["seeds"]),
               "--epochs", str(scale["epochs"]),
               "--stage1-features", "8", "--stage2-features", "64",
               "--hidden-units", "20", "--seed", "0",
               "--out-dir", str(out), "--quiet"])
    assert rc == 0
    with open(out / "compare.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * len(scale["seeds"])
    pairs: dict[str, dict[str, float]] = {}
    for row in rows:
        pairs.setdefault(row["seed"], {})[row["variant"]] = float(row["val_error"])
        assert row["improvement_pct"] != ""  # paired delta always emitted
    wins = sum(p["ms"] <= p["ss"] for p in pairs.values())
    ok = wins >= 2
    report("criterion 8 MS vs SS", ok,
           f"MS <= SS in {wins}/{len(pairs)} seeds; pairs " +
           " ".join(f"seed{s}:(ss={p['ss']:.4f},ms={p['ms']:.4f})"
                    for s, p in sorted(pairs.items())))
    assert ok


# --- criterion 9: container format ------------------------------------------

def test_criterion_9_container_format(tmp_path):
    rng = np.random.default_rng(8)
    images = rng.integers(0, 256, size=(16, 3, 32, 32), dtype=np.uint8)
    labels = rng.integers(0, 10, size=16).astype(np.uint8)
    path = tmp_path / "d.cnd"
    write_container(path, images, labels)
    back_images, back_labels = read_container(path)
    round_trip = (np.array_equal(back_images, images)
                  and np.array_equal(back_labels, labels))

    blob = path.read_bytes()
    corrupt = {
        "bad magic": b"XXXX" + blob[4:],
        "truncated payload": blob[:len(blob) - 7],
        "bad dtype code": blob[:8] + b"\xee\x00\x00\x00" + blob[12:],
    }
    rejected = 0
    for name, corrupted in corrupt.items():
        bad = tmp_path / "bad.cnd"
        bad.write_bytes(corrupted)
        try:
            read_container(bad)
        except FormatError:
            rejected += 1
    ok = round_trip and rejected == 3
    report("criterion 9 container format", ok,
           f"round trip bit-exact: {round_trip}; corrupt files rejected: {rejected}/3")
    assert ok


# --- criterion 10: determinism ----------------------------------------------

def test_criterion_10_determinism(street_containers, tmp_path):
    outputs = []
    for name in ("one", "two"):
        out = tmp_path / name
        rc = main(["train", "--data", str(street_containers / "train.cnd"),
                   "--val", str(street_containers / "val.cnd"),
                   "--p", "2", "--ms", "--epochs", "2", "--seed", "3",
                   "--stage1-features", "2", "--stage2-features", "4",
                   "--hidden-units", "4", "--out-dir", str(out), "--quiet"])
        assert rc == 0
        outputs.append((out / "metrics.csv").read_bytes())
    ok = outputs[0] == outputs[1]
    report("criterion 10 determinism", ok,
           f"metrics CSV bytes identical across serial reruns: {ok}")
    assert ok
