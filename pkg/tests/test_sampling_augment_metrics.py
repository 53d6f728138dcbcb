import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wildfusion.augment import AugmentationConfig, augment_image, color_jitter, cutout, hflip, rotate, sample_rng
from wildfusion.metrics import ConfusionMatrix, cohen_kappa, metric_report, overall_accuracy, per_class_metrics
from wildfusion.sampling import (
    BoundaryLabel,
    SmoteConfig,
    borderline_smote,
    classify_boundary_points,
    nearest_neighbors,
    oversample_weights,
    weighted_sample_indices,
)

# ---- sampling


def brute_knn(points, i, k):
    d = [(float(np.sum((points[j] - points[i]) ** 2)), j) for j in range(len(points)) if j != i]
    return [j for _, j in sorted(d)[:k]]


def test_nearest_neighbors_matches_brute_force_with_ties():
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 4, size=(60, 2)).astype(float)  # many exact ties
    nn = nearest_neighbors(pts, np.arange(60), 5)
    for i in range(60):
        assert nn[i].tolist() == brute_knn(pts, i, 5)


def test_boundary_thresholds():
    # One minority point at the origin; majority points placed to control m'.
    minority = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]])
    far = np.array([[10.0, 10.0]] * 3)
    labels = classify_boundary_points(minority, far, 2)
    assert labels == [BoundaryLabel.SAFE] * 3
    close = np.array([[0.0, 0.01], [0.0, -0.01], [0.0, 0.02], [0.0, -0.02]])
    assert classify_boundary_points(minority[:1], close, 4) == [BoundaryLabel.NOISE]
    mixed = np.array([[0.0, 0.01], [0.0, -0.01]])
    # m = 4 neighbors of point 0: two majority, two minority -> m' = m/2 is Danger.
    assert classify_boundary_points(minority, mixed, 4)[0] is BoundaryLabel.DANGER
    with pytest.raises(ValueError, match="dataset size"):
        classify_boundary_points(minority, mixed, 10)


def test_smote_deterministic_and_only_for_minorities():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0, 1, (200, 3)), rng.normal(0.8, 1, (40, 3)), rng.normal(-0.8, 1, (30, 3))])
    y = np.array([0] * 200 + [1] * 40 + [2] * 30)
    a = borderline_smote(X, y, SmoteConfig(seed=1))
    b = borderline_smote(X, y, SmoteConfig(seed=1))
    np.testing.assert_array_equal(a[0], b[0])
    assert set(np.unique(a[1])) <= {1, 2}
    assert len(a[0]) > 0
    c = borderline_smote(X, y, SmoteConfig(seed=2))
    assert not np.array_equal(a[0], c[0])


def test_smote_synthetic_count_matches_danger_count():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(0, 1, (150, 2)), rng.normal(1, 1, (30, 2))])
    y = np.array([0] * 150 + [1] * 30)
    labels = classify_boundary_points(X[y == 1], X[y == 0], 5)
    n_danger = sum(lab is BoundaryLabel.DANGER for lab in labels)
    syn, _ = borderline_smote(X, y, SmoteConfig(5, 5, 3, 0))
    assert len(syn) == 3 * n_danger


def test_smote_rejects_bad_input():
    with pytest.raises(ValueError, match="two classes"):
        borderline_smote(np.zeros((5, 2)), np.zeros(5))
    with pytest.raises(ValueError):
        SmoteConfig(m_neighbors=0)


def test_oversampling_balances_classes():
    labels = np.array([0] * 900 + [1] * 100)
    w = oversample_weights(labels)
    assert w[0] == pytest.approx(1 / 900) and w[-1] == pytest.approx(1 / 100)
    idx = weighted_sample_indices(w, 20000, np.random.default_rng(0))
    frac = (labels[idx] == 1).mean()
    assert abs(frac - 0.5) < 0.02


# ---- augmentation


def test_primitives():
    img = np.random.default_rng(0).random((40, 50, 3))
    np.testing.assert_array_equal(hflip(hflip(img)), img)
    np.testing.assert_array_equal(rotate(img, 0.0), img)
    assert rotate(img, 30.0).shape == img.shape
    np.testing.assert_allclose(color_jitter(img), img, atol=1e-12)
    out = cutout(img, [(0, 0)], 10)
    assert np.all(out[:10, :10] == 0) and np.array_equal(out[10:], img[10:])


def test_augment_preserves_shape_and_is_reproducible():
    img = np.random.default_rng(1).random((64, 80, 3))
    cfg = AugmentationConfig()
    a = augment_image(img, cfg, sample_rng(7, 3))
    b = augment_image(img, cfg, sample_rng(7, 3))
    np.testing.assert_array_equal(a, b)
    assert a.shape == img.shape and a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, augment_image(img, cfg, sample_rng(7, 4)))


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentationConfig(hflip_prob=1.5)
    with pytest.raises(ValueError, match="reversed"):
        AugmentationConfig(rotation_range_degrees=(10, -10))
    with pytest.raises(ValueError, match="smaller than cutout"):
        augment_image(np.zeros((16, 16, 3)), AugmentationConfig(), np.random.default_rng(0))


# ---- metrics


def brute_kappa(actual, predicted, k):
    n = len(actual)
    p_o = sum(a == p for a, p in zip(actual, predicted)) / n
    p_e = sum(actual.count(c) * predicted.count(c) for c in range(k)) / n**2
    return (p_o - p_e) / (1 - p_e)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6).flatmap(lambda k: st.tuples(st.just(k), st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), min_size=1, max_size=60))))
def test_kappa_property(case):
    k, pairs = case
    actual, predicted = [a for a, _ in pairs], [p for _, p in pairs]
    m = ConfusionMatrix.from_predictions(actual, predicted, k)
    assert m.total == len(pairs)
    n = len(pairs)
    p_e = sum(actual.count(c) * predicted.count(c) for c in range(k)) / n**2
    if p_e == 1.0:
        with pytest.raises(ValueError, match="p_e"):
            cohen_kappa(m)
    else:
        assert cohen_kappa(m) == pytest.approx(brute_kappa(actual, predicted, k), abs=1e-12)
        assert -1.0 <= cohen_kappa(m) <= 1.0


def test_confusion_accumulate_and_merge():
    m = ConfusionMatrix(3)
    m.accumulate(0, 1).accumulate(2, 2)
    assert m.counts[0, 1] == 1 and m.total == 2
    assert (m + m).total == 4
    with pytest.raises(ValueError, match="out of range"):
        m.accumulate(3, 0)
    with pytest.raises(ValueError, match="square"):
        ConfusionMatrix(counts=[[1, 2]])
    with pytest.raises(ValueError):
        overall_accuracy(ConfusionMatrix(2))


def test_zero_denominators_and_macro_over_supported():
    # Class 2 never appears and is never predicted.
    m = ConfusionMatrix(counts=[[3, 1, 0], [0, 4, 0], [0, 0, 0]])
    per, macro, no_support, undefined = per_class_metrics(m)
    assert no_support == [2]
    assert per["precision"][2] == 0.0 and 2 in undefined["precision"]
    assert macro["recall"] == pytest.approx((0.75 + 1.0) / 2)


def test_single_class_kappa_fallback():
    assert metric_report(ConfusionMatrix(counts=[[5, 0], [0, 0]])).kappa == 1.0
    assert metric_report(ConfusionMatrix(counts=[[0, 5], [0, 0]])).kappa == 0.0


def test_report_serializes():
    rep = metric_report(ConfusionMatrix(counts=[[50, 10], [5, 35]]), ["a", "b"])
    d = rep.to_dict()
    assert d["classes"][0]["class"] == "a" and d["classes"][0]["tp"] == 50
    assert d["kappa"] == pytest.approx(0.6938775510204082)
    assert '"overall_accuracy": 0.85' in rep.to_json()
