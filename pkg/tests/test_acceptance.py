"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from wildfusion import cli
from wildfusion.ablation import (
    TrialConfig,
    count_trials,
    enumerate_trials,
    prepare_trial_splits,
    run_trials,
    scores_by_class_count,
)
from wildfusion.augment import AugmentationConfig, augment_image
from wildfusion.data.splits import split_dataset, split_indices
from wildfusion.metadata import (
    FIVE_GROUPS,
    FOUR_GROUPS,
    METADATA_DIM,
    SLICES,
    FeatureGroup,
    RawMetadata,
    assemble_metadata,
)
from wildfusion.metrics import ConfusionMatrix, cohen_kappa, metric_report
from wildfusion.models import CBAM, MCBAM, Bottleneck, FusionModelConfig, LateFusionHead, build_model, gate_override
from wildfusion.sampling import BoundaryLabel, SmoteConfig, borderline_smote, classify_boundary_points
from wildfusion.synthetic import class_hierarchy, complementary, metadata_determined
from wildfusion.tensor import Tensor, finite_difference_check, lr_at, ops
from wildfusion.tensor.checkpoint import load_checkpoint
from wildfusion.training import TrainConfig, evaluate, train_model
from wildfusion.metrics import overall_accuracy


@pytest.fixture
def report(capsys):
    def _report(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:2d} {title}: {'PASS' if ok else 'FAIL'}{' - ' + detail if detail else ''}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return _report


# ---------------------------------------------------------------- 1


def _scalar(out: Tensor, r: np.ndarray, labels) -> Tensor:
    """Fixed random projection of an output to a scalar loss."""
    z = ops.mul(out, Tensor(r))
    if z.ndim == 4:
        z = ops.global_avg_pool(z)
    return ops.cross_entropy_loss(z, labels)


def _primitive_cases(rng):
    B, C, H = 2, 3, 6
    x4 = Tensor(rng.standard_normal((B, C, H, H)), requires_grad=True)
    x2 = Tensor(rng.standard_normal((B, 5)), requires_grad=True)
    w_lin = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    b_lin = Tensor(rng.standard_normal(4), requires_grad=True)
    w_conv = Tensor(rng.standard_normal((4, C, 3, 3)), requires_grad=True)
    b_conv = Tensor(rng.standard_normal(4), requires_grad=True)
    gamma = Tensor(rng.random(C) + 0.5, requires_grad=True)
    beta = Tensor(rng.standard_normal(C), requires_grad=True)
    other4 = Tensor(rng.standard_normal((B, C, H, H)), requires_grad=True)
    gate = Tensor(rng.standard_normal((B, C)), requires_grad=True)
    y = rng.integers(0, 3, size=B)
    y4 = rng.integers(0, 4, size=B)
    r = lambda *s: rng.standard_normal(s)  # noqa: E731
    r4, r3, r1 = r(B, C, H, H), r(B, 4, H, H), r(B, 1, H, H)
    r_pool = r(B, C, H // 2, H // 2)
    r_s2 = r(B, 4, 3, 3)
    return {
        "linear": (lambda a, w, b: ops.cross_entropy_loss(ops.linear(a, w, b), y4), [x2, w_lin, b_lin]),
        "conv2d": (lambda a, w, b: _scalar(ops.conv2d(a, w, b, padding=1), r3, y4), [x4, w_conv, b_conv]),
        "conv2d-stride2": (lambda a, w: _scalar(ops.conv2d(a, w, stride=2, padding=1), r_s2, y4), [x4, w_conv]),
        "relu": (lambda a: _scalar(ops.relu(a), r4, y), [x4]),
        "sigmoid": (lambda a: _scalar(ops.sigmoid(a), r4, y), [x4]),
        "avg-pool": (lambda a: _scalar(ops.avg_pool(a, 2), r_pool, y), [x4]),
        "max-pool": (lambda a: _scalar(ops.max_pool(a, 2), r_pool, y), [x4]),
        "global-avg-pool": (lambda a: ops.cross_entropy_loss(ops.global_avg_pool(a), y), [x4]),
        "global-max-pool": (lambda a: ops.cross_entropy_loss(ops.global_max_pool(a), y), [x4]),
        "global-pool-channel": (
            lambda a: _scalar(ops.concat([ops.global_avg_pool(a, "channel"), ops.global_max_pool(a, "channel")], 1), np.concatenate([r1, r1], 1), [0, 1]),
            [x4],
        ),
        "elementwise-mul": (lambda a, g: _scalar(ops.mul(a, g), r4, y), [x4, gate]),
        "add": (lambda a, b: _scalar(ops.add(a, b), r4, y), [x4, other4]),
        "concat": (lambda a, b: ops.cross_entropy_loss(ops.concat([a, b], 1), [0, 7]), [x2, Tensor(rng.standard_normal((B, 3)), requires_grad=True)]),
        "batch-norm": (lambda a, g, b: _scalar(ops.batch_norm(a, g, b), r4, y), [x4, gamma, beta]),
        "cross-entropy": (lambda a: ops.cross_entropy_loss(a, y4), [Tensor(rng.standard_normal((B, 4)), requires_grad=True)]),
    }


def _block_cases(seed):
    rng = np.random.default_rng(seed)
    B, C, H, D = 2, 8, 4, 5
    x = Tensor(rng.standard_normal((B, C, H, H)), requires_grad=True)
    meta = Tensor(rng.random((B, D)), requires_grad=True)
    labels = rng.integers(0, C, size=B)
    r = rng.standard_normal((B, C, H, H))
    ef = Bottleneck(C, C, 1, seed, "ef", expansion=4, metadata_dim=D, early_fusion=True)
    cbam = CBAM(C, 4, 3, seed, "cbam")
    mcbam = MCBAM(C, 4, 3, D, seed, "mcbam")
    head = LateFusionHead(6, D, [7, 5, 3], seed, "head")
    v1 = Tensor(rng.standard_normal((B, 6)), requires_grad=True)
    return {
        "early-fusion block": (lambda a, m: _scalar(ef(a, m), r, labels), [x, meta], ef.parameters()),
        "CBAM": (lambda a: _scalar(cbam(a), r, labels), [x], cbam.parameters()),
        "MCBAM": (lambda a, m: _scalar(mcbam(a, m), r, labels), [x, meta], mcbam.parameters()),
        "late-fusion head": (lambda a, m: ops.cross_entropy_loss(head(a, m), labels[:B] % 3), [v1, meta], head.parameters()),
    }


def test_criterion_01_gradient_fidelity(report):
    start = time.perf_counter()
    worst: dict[str, float] = {}
    for seed in range(20):
        for name, (fn, inputs) in _primitive_cases(np.random.default_rng(seed)).items():
            worst[name] = max(worst.get(name, 0.0), finite_difference_check(fn, inputs, epsilon=1e-6))
        for name, (fn, inputs, params) in _block_cases(seed).items():
            worst[name] = max(worst.get(name, 0.0), finite_difference_check(fn, inputs, epsilon=1e-6, params=params))
    elapsed = time.perf_counter() - start
    bad = {k: v for k, v in worst.items() if not v < 1e-4}
    ok = not bad and elapsed < 60
    report(1, "gradient fidelity", ok, f"{len(worst)} graphs x 20 seeds, max rel err {max(worst.values()):.2e}, {elapsed:.1f}s" + (f", failing {bad}" if bad else ""))


# ---------------------------------------------------------------- 2


def test_criterion_02_structural_identity(report):
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((3, 8, 6, 6)))
    meta = Tensor(rng.random((3, 11)))
    worst_ef = 0.0
    for stride, cout in ((1, 8), (2, 16)):
        plain = Bottleneck(8, cout, stride, 7, "blk")
        fused = Bottleneck(8, cout, stride, 7, "blk", metadata_dim=11, early_fusion=True)
        with gate_override(fused, "early"):
            diff = np.abs(fused(x, meta).data - plain(x).data).max()
        worst_ef = max(worst_ef, diff)
    cbam = CBAM(16, 4, 7, 3, "att")
    mcbam = MCBAM(16, 4, 7, 11, 3, "att")
    f = Tensor(rng.standard_normal((3, 16, 5, 5)))
    with gate_override(mcbam, "metadata"):
        exact = np.array_equal(mcbam(f, meta).data, cbam(f).data)
    # Whole-model check: early fusion with all gates forced equals the image-only model.
    cfg = dict(input_image_side=8, stage_channel_widths=[8, 16], blocks_per_stage=[1, 1], num_classes=3)
    img_model = build_model(FusionModelConfig(fusion_mode="image_only", **cfg), seed=5)
    ef_model = build_model(FusionModelConfig(fusion_mode="early_fusion", **cfg), seed=5)
    imgs = rng.standard_normal((2, 3, 8, 8))
    m538 = rng.random((2, METADATA_DIM))
    with gate_override(ef_model, "early"):
        model_diff = np.abs(ef_model(imgs, m538).data - img_model(imgs).data).max()
    ok = worst_ef <= 1e-12 and exact and model_diff <= 1e-12
    report(2, "structural identity", ok, f"early-fusion block diff {worst_ef:.1e}, model diff {model_diff:.1e}, MCBAM==CBAM exact: {exact}")


# ---------------------------------------------------------------- 3


def test_criterion_03_metadata_layout(report):
    rng = np.random.default_rng(0)
    widths = [SLICES[k].stop - SLICES[k].start for k in ("datetime", "temperature", "position", "scene_attributes", "scene_descriptors")]
    base = np.datetime64("2000-01-01T00:00")
    span_minutes = 60 * 24 * 366 * 30
    ok_len = ok_sum = True
    for _ in range(10_000):
        ts = (base + np.timedelta64(int(rng.integers(0, span_minutes)), "m")).astype(object)
        raw = RawMetadata(
            timestamp=ts,
            temperature_celsius=None if rng.random() < 0.2 else float(rng.uniform(-50, 50)),
            latitude=float(rng.uniform(50, 80)),
            longitude=float(rng.uniform(0, 35)),
            scene_attributes=tuple(rng.random(102)),
            scene_descriptors=tuple(rng.random(365)),
        )
        v = assemble_metadata(raw)
        ok_len &= v.shape == (538,)
        ok_sum &= v[SLICES["datetime"]].sum() == 3.0
    ok = ok_len and ok_sum and widths == [67, 2, 2, 102, 365] and METADATA_DIM == 538
    report(3, "metadata layout", ok, f"widths {widths}, 10,000 timestamps, datetime sums all 3: {ok_sum}")


# ---------------------------------------------------------------- 4


def _brute_force(actual, predicted, k):
    n = len(actual)
    out = {"precision": [], "recall": [], "f1": [], "fpr": [], "fnr": []}
    for c in range(k):
        tp = sum(1 for a, p in zip(actual, predicted) if a == c and p == c)
        fp = sum(1 for a, p in zip(actual, predicted) if a != c and p == c)
        fn = sum(1 for a, p in zip(actual, predicted) if a == c and p != c)
        tn = n - tp - fp - fn
        d = lambda a, b: a / b if b else 0.0  # noqa: E731
        out["precision"].append(d(tp, tp + fp))
        out["recall"].append(d(tp, tp + fn))
        out["f1"].append(d(2 * tp, 2 * tp + fp + fn))
        out["fpr"].append(d(fp, fp + tn))
        out["fnr"].append(d(fn, fn + tp))
    p_o = sum(1 for a, p in zip(actual, predicted) if a == p) / n
    p_e = sum((list(actual).count(c) / n) * (list(predicted).count(c) / n) for c in range(k))
    kappa = (p_o - p_e) / (1 - p_e)
    return out, p_o, kappa


def test_criterion_04_kappa_metric_oracle(report):
    rng = np.random.default_rng(0)
    worst = 0.0
    checked = 0
    while checked < 1000:
        k = int(rng.integers(2, 14))
        n = int(rng.integers(5, 300))
        actual = rng.integers(0, k, size=n)
        # Skewed predictions: mostly right, sometimes random.
        predicted = np.where(rng.random(n) < rng.random(), actual, rng.integers(0, k, size=n))
        rates, acc, kappa = _brute_force(actual.tolist(), predicted.tolist(), k)
        if not np.isfinite(kappa):
            continue
        rep = metric_report(ConfusionMatrix.from_predictions(actual, predicted, k))
        errs = [abs(rep.overall_accuracy - acc), abs(rep.kappa - kappa)]
        for name, vals in rates.items():
            errs.append(np.abs(rep.per_class[name] - np.array(vals)).max())
        worst = max(worst, max(errs))
        checked += 1
    k0 = cohen_kappa(ConfusionMatrix(counts=[[1, 1], [1, 1]]))
    k1 = cohen_kappa(ConfusionMatrix(counts=[[50, 10], [5, 35]]))
    ok = worst <= 1e-12 and k0 == 0.0 and round(k1, 4) == 0.6939 and abs(k1 - 34 / 49) < 1e-15
    report(4, "kappa/metric oracle", ok, f"1000 matrices, max err {worst:.1e}; kappa cases {k0}, {k1:.4f}")


# ---------------------------------------------------------------- 5


def _oracle_labels(minority, majority, m):
    pts = np.vstack([minority, majority])
    labels = []
    for i in range(len(minority)):
        d = [(float(np.sum((pts[j] - pts[i]) ** 2)), j) for j in range(len(pts)) if j != i]
        d.sort()
        maj = sum(1 for _, j in d[:m] if j >= len(minority))
        labels.append(BoundaryLabel.NOISE if maj == m else BoundaryLabel.DANGER if maj >= m / 2 else BoundaryLabel.SAFE)
    return labels


def test_criterion_05_smote(report):
    rng = np.random.default_rng(0)
    label_ok = between_ok = True
    n_syn = 0
    for trial in range(10):
        n_min, n_maj = int(rng.integers(20, 80)), int(rng.integers(100, 400))
        minority = rng.normal(0, 1, (n_min, 2))
        majority = rng.normal(1.2, 1, (n_maj, 2))
        m = 5
        label_ok &= classify_boundary_points(minority, majority, m) == _oracle_labels(minority, majority, m)
        X = np.vstack([minority, majority])
        y = np.array([1] * n_min + [0] * n_maj)
        syn, ys, src = borderline_smote(X, y, SmoteConfig(m, 5, 2, trial), return_sources=True)
        n_syn += len(syn)
        lo = np.minimum(X[src[:, 0]], X[src[:, 1]]) - 1e-9
        hi = np.maximum(X[src[:, 0]], X[src[:, 1]]) + 1e-9
        between_ok &= bool(np.all((syn >= lo) & (syn <= hi))) and bool(np.all(y[src] == 1)) and bool(np.all(ys == 1))
    # Every minority point buried inside the majority cloud -> all Noise -> nothing synthesized.
    grid = np.stack(np.meshgrid(np.arange(20.0), np.arange(20.0)), -1).reshape(-1, 2)
    lonely = np.array([[5.5, 5.5], [14.5, 14.5], [9.5, 3.5]])
    X = np.vstack([lonely, grid])
    y = np.array([1] * 3 + [0] * len(grid))
    noise_syn, _ = borderline_smote(X, y, SmoteConfig(5, 5, 3, 0))
    all_noise = set(classify_boundary_points(lonely, grid, 5)) == {BoundaryLabel.NOISE} and len(noise_syn) == 0
    # Validation/test splits untouched by oversampling.
    meta, labels = class_hierarchy(samples_per_class=40, seed=1)
    trial = enumerate_trials(range(6), [FeatureGroup.SCENE_ATTRIBUTES], seed=3)[-1]
    with_smote = prepare_trial_splits(trial, meta, labels, TrialConfig())
    without = prepare_trial_splits(trial, meta, labels, TrialConfig(use_smote=False))
    untouched = all(
        with_smote[s][i].tobytes() == without[s][i].tobytes() for s in ("validation", "test") for i in (0, 1)
    )
    grew = len(with_smote["train"][0]) >= len(without["train"][0])
    ok = label_ok and between_ok and all_noise and untouched and grew and n_syn > 0
    report(5, "SMOTE correctness", ok, f"labels match oracle: {label_ok}, {n_syn} synthetic in-between: {between_ok}, all-noise -> 0: {all_noise}, val/test identical: {untouched}")


# ---------------------------------------------------------------- 6


def test_criterion_06_enumeration_counts(report, tmp_path):
    big = enumerate_trials(range(13), FIVE_GROUPS)
    small = enumerate_trials(range(9), FOUR_GROUPS)
    unique_big = len({(t.class_subset, t.features) for t in big})
    closed = count_trials(13, 5) == 253_518 and count_trials(9, 4) == 7_530
    code = cli.main(["ablate", "--preset", "ablation-9", "--plan-only", "--output-dir", str(tmp_path)])
    text = (tmp_path / "trials.tsv").read_text()
    rows = sum(1 for line in text.splitlines() if line and line[0].isdigit())
    documented = "7529" in text and "7530" in text
    ok = len(big) == unique_big == 253_518 and len(small) == 7_530 and closed and code == 0 and rows == 7_530 and documented
    report(6, "enumeration counts", ok, f"13x5 -> {len(big)}, 9x4 -> {len(small)}, CLI rows {rows}, deviation noted in header: {documented}")


# ---------------------------------------------------------------- 7

DESK = dict(input_image_side=16, stage_channel_widths=[8, 16], blocks_per_stage=[1, 1], num_classes=4, dtype="float32")
DESK_TRAIN = TrainConfig(epochs=25, batch_size=64, base_lr=0.02, momentum=0.9)


def _fit_and_test(mode, data, parts, seed, config=DESK_TRAIN, **overrides):
    cfg = FusionModelConfig(fusion_mode=mode, **{**DESK, **overrides})
    model = build_model(cfg, seed=seed)
    result = train_model(model, data.subset(parts["train"]), data.subset(parts["validation"]), config)
    model.load_state_dict(result.best_state)
    return overall_accuracy(evaluate(model, data.subset(parts["test"])))


def test_criterion_07_desk_separability(report):
    start = time.perf_counter()
    data = metadata_determined(n=2000, num_classes=4, side=16, seed=0, dtype=np.float32)
    parts = split_indices(split_dataset(data.labels, seed=0))
    acc = {mode: _fit_and_test(mode, data, parts, seed=0) for mode in ("metadata_only", "early_fusion", "image_only")}
    n_test = len(parts["test"])
    se = np.sqrt(0.25 * 0.75 / n_test)
    elapsed = time.perf_counter() - start
    ok = acc["metadata_only"] >= 0.95 and acc["early_fusion"] >= 0.95 and abs(acc["image_only"] - 0.25) <= 3 * se and elapsed < 600
    detail = ", ".join(f"{k} {v:.3f}" for k, v in acc.items()) + f"; chance band 0.25 +/- {3 * se:.3f}; {elapsed:.0f}s"
    report(7, "desk-scale separability", ok, detail)


# ---------------------------------------------------------------- 8


def test_criterion_08_fusion_benefit(report):
    train_cfg = TrainConfig(epochs=15, batch_size=64, base_lr=0.02, momentum=0.9)
    rows = []
    for seed in range(5):
        data = complementary(n=1200, side=16, seed=seed, dtype=np.float32)
        parts = split_indices(split_dataset(data.labels, seed=seed))
        # A 64-wide last stage keeps image features from being swamped by 538 metadata inputs in the late head.
        rows.append({mode: _fit_and_test(mode, data, parts, seed, train_cfg, stage_channel_widths=[8, 64]) for mode in ("image_only", "early_fusion", "late_fusion")})
    each = all(r["early_fusion"] >= r["image_only"] and r["late_fusion"] >= r["image_only"] for r in rows)
    gain_ef = np.mean([r["early_fusion"] - r["image_only"] for r in rows])
    gain_lf = np.mean([r["late_fusion"] - r["image_only"] for r in rows])
    ok = each and gain_ef > 0 and gain_lf > 0
    report(8, "fusion benefit direction", ok, f"mean gain early {gain_ef:+.3f}, late {gain_lf:+.3f}; per seed " + json.dumps([{k: round(v, 3) for k, v in r.items()} for r in rows]))


# ---------------------------------------------------------------- 9


def test_criterion_09_class_count_degradation(report):
    meta, labels = class_hierarchy(seed=0)
    results = []
    for rep in range(3):
        trials = enumerate_trials(range(6), [FeatureGroup.SCENE_ATTRIBUTES], seed=rep)
        results += run_trials(trials, meta, labels, TrialConfig(), workers=1)
    rows = scores_by_class_count(results)
    acc = [r["mean_accuracy"] for r in rows]
    kap = [r["mean_kappa"] for r in rows]
    ok = bool(np.all(np.diff(acc) <= 0) and np.all(np.diff(kap) <= 0))
    report(9, "class-count degradation", ok, f"accuracy {np.round(acc, 3).tolist()}, kappa {np.round(kap, 3).tolist()} for 2..6 classes")


# ---------------------------------------------------------------- 10


def test_criterion_10_schedule_and_round_trip(report, tmp_path):
    lrs = [lr_at(e) for e in (0, 7, 14)]
    schedule_ok = lrs == [1e-3, 1e-4, 1e-5]
    data_dir = tmp_path / "data"
    assert cli.main(["synth", "--output-dir", str(data_dir), "--count", "120", "--side", "16"]) == 0
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        "output_dir: {out}\nmanifest: {m}\ntaxonomy: aggressive-13\nepochs: 3\nbatch_size: 16\nbase_lr: 0.02\nmomentum: 0.9\n"
        "model:\n  fusion_mode: early_fusion\n  input_image_side: 16\n  stage_channel_widths: [8, 16]\n  blocks_per_stage: [1, 1]\n".format(
            out=tmp_path / "run", m=data_dir / "manifest.jsonl"
        )
    )
    assert cli.main(["train", "--config", str(cfg)]) == 0
    run = tmp_path / "run"
    summary = json.loads((run / "train_log.jsonl").read_text().splitlines()[-1])
    reproduced = True
    for which in ("best", "final"):
        assert cli.main(["evaluate", "--config", str(cfg), "--checkpoint", str(run / f"checkpoint_{which}.wfc")]) == 0
        val = json.loads((run / "evaluation.json").read_text())["validation"]
        reproduced &= val["overall_accuracy"] == summary[which]["val_accuracy"] and val["kappa"] == summary[which]["val_kappa"]
    # Bit-exact tensor round trip.
    model_cfg = FusionModelConfig(fusion_mode="mcbam", input_image_side=8, stage_channel_widths=[8], blocks_per_stage=[1], num_classes=3)
    model = build_model(model_cfg, seed=11)
    from wildfusion.training import save_model

    save_model(tmp_path / "m.wfc", model)
    tensors, _ = load_checkpoint(tmp_path / "m.wfc", expected_digest=model_cfg.digest())
    state = model.state_dict()
    bit_exact = list(tensors) == list(state) and all(tensors[k].tobytes() == state[k].tobytes() and tensors[k].dtype == state[k].dtype for k in state)
    ok = schedule_ok and reproduced and bit_exact
    report(10, "schedule and round-trip", ok, f"lr {lrs}, evaluate reproduces logged val metrics: {reproduced}, bit-exact load: {bit_exact}")


# ---------------------------------------------------------------- 11


def test_criterion_11_augmentation_contract(report):
    only_cutout = AugmentationConfig(hflip_prob=0.0, rotation_prob=0.0, jitter_prob=0.0)
    rng = np.random.default_rng(0)
    cutout_ok = True
    for _ in range(50):
        img = rng.random((96, 128, 3)) * 0.9 + 0.05
        out, applied = augment_image(img, only_cutout, rng, return_params=True)
        mask = np.zeros(img.shape[:2], bool)
        for top, left in applied.holes:
            mask[top : top + 32, left : left + 32] = True
        cutout_ok &= len(applied.holes) == 8 and bool(np.all(out[mask] == 0)) and np.array_equal(out[~mask], img[~mask])
    full = AugmentationConfig()
    flips, angles = 0, []
    small = np.full((32, 32, 3), 0.5)
    for _ in range(10_000):
        _, applied = augment_image(small, AugmentationConfig(cutout_prob=0.0, jitter_prob=0.0), rng, return_params=True)
        flips += applied.flipped
        angles.append(applied.angle)
    _, applied = augment_image(rng.random((64, 64, 3)), full, rng, return_params=True)
    rate = flips / 10_000
    angles = np.array(angles)
    ok = cutout_ok and abs(rate - 0.5) <= 0.02 and bool(np.all(np.abs(angles) <= 45)) and len(applied.holes) == 8
    report(11, "augmentation contract", ok, f"8 zeroed 32x32 holes: {cutout_ok}, flip rate {rate:.4f}, angles in [{angles.min():.1f}, {angles.max():.1f}]")
