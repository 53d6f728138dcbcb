"""Borderline-SMOTE and inverse-frequency oversampling weights."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)


class BoundaryLabel(enum.Enum):
    SAFE = "safe"
    DANGER = "danger"
    NOISE = "noise"


@dataclass(frozen=True)
class SmoteConfig:
    m_neighbors: int = 5
    k_interp_neighbors: int = 5
    synthetic_per_danger: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.m_neighbors < 1 or self.k_interp_neighbors < 1 or self.synthetic_per_danger < 1:
            raise ValueError("SMOTE neighbor counts and synthetic_per_danger must be >= 1")


def nearest_neighbors(points: np.ndarray, queries_idx: np.ndarray, k: int, candidates_idx: np.ndarray | None = None):
    """Indices of the ``k`` nearest candidates (Euclidean) for each query point.

    The query point itself is excluded.  Ties go to the lower sample index.
    """
    points = np.asarray(points, dtype=float)
    cand = np.arange(len(points)) if candidates_idx is None else np.asarray(candidates_idx)
    d2 = cdist(points[queries_idx], points[cand], metric="sqeuclidean")
    d2[np.asarray(queries_idx)[:, None] == cand[None, :]] = np.inf
    # lexsort: primary key distance, secondary key candidate index
    order = np.lexsort((np.broadcast_to(cand, d2.shape), d2), axis=1)
    return cand[order[:, :k]]


def _labels_from_counts(majority_counts: np.ndarray, m: int) -> list[BoundaryLabel]:
    out = []
    for mp in majority_counts:
        if mp == m:
            out.append(BoundaryLabel.NOISE)
        elif 2 * mp >= m:
            out.append(BoundaryLabel.DANGER)
        else:
            out.append(BoundaryLabel.SAFE)
    return out


def classify_boundary_points(minority: np.ndarray, majority: np.ndarray, m: int) -> list[BoundaryLabel]:
    """Safe / Danger / Noise per minority point from its ``m`` nearest neighbors.

    With m' majority points among the neighbors: m' == m is Noise,
    m/2 <= m' < m is Danger, otherwise Safe.
    """
    minority = np.atleast_2d(np.asarray(minority, dtype=float))
    majority = np.asarray(majority, dtype=float).reshape(-1, minority.shape[1])
    points = np.vstack([minority, majority])
    if m < 1 or m > len(points) - 1:
        raise ValueError(f"m={m} needs 1 <= m <= {len(points) - 1} (dataset size - 1)")
    nn = nearest_neighbors(points, np.arange(len(minority)), m)
    majority_counts = (nn >= len(minority)).sum(axis=1)
    return _labels_from_counts(majority_counts, m)


def borderline_smote(features: np.ndarray, labels: np.ndarray, config: SmoteConfig = SmoteConfig(), return_sources: bool = False):
    """Synthetic minority samples interpolated from Danger points.

    Every class smaller than the largest one is treated as a minority class
    against all other samples.  For each Danger point ``p`` the method draws
    ``synthetic_per_danger`` samples ``p + delta * (q - p)`` with ``q`` one of
    the ``k_interp_neighbors`` nearest same-class points and ``delta ~ U[0, 1]``.

    Returns ``(synthetic_features, synthetic_labels)``, plus an ``S x 2``
    array of ``(p, q)`` row indices when ``return_sources`` is set.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"features {X.shape} and labels {y.shape} do not line up")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("borderline SMOTE needs at least two classes")
    rng = np.random.default_rng(config.seed)
    m = min(config.m_neighbors, len(X) - 1)
    new_x, new_y, sources = [], [], []
    for cls, count in zip(classes, counts):
        if count >= counts.max():
            continue
        minority_idx = np.flatnonzero(y == cls)
        if count < 2:
            log.warning("class %s has a single sample; skipped", cls)
            continue
        nn = nearest_neighbors(X, minority_idx, m)
        majority_counts = (y[nn] != cls).sum(axis=1)
        boundary = _labels_from_counts(majority_counts, m)
        danger = minority_idx[[b is BoundaryLabel.DANGER for b in boundary]]
        if len(danger) == 0:
            continue
        k = min(config.k_interp_neighbors, count - 1)
        interp = nearest_neighbors(X, danger, k, candidates_idx=minority_idx)
        for row, p_idx in enumerate(danger):
            for _ in range(config.synthetic_per_danger):
                q_idx = interp[row, rng.integers(k)]
                delta = rng.random()
                new_x.append(X[p_idx] + delta * (X[q_idx] - X[p_idx]))
                new_y.append(cls)
                sources.append((p_idx, q_idx))
    if not new_x:
        out = (np.zeros((0, X.shape[1])), np.zeros(0, dtype=y.dtype))
        return out + (np.zeros((0, 2), dtype=np.int64),) if return_sources else out
    out = (np.asarray(new_x), np.asarray(new_y, dtype=y.dtype))
    return out + (np.asarray(sources, dtype=np.int64),) if return_sources else out


def oversample_weights(labels) -> np.ndarray:
    """``1 / count(class)`` per sample, so each class is drawn equally often."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("no labels given")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    return 1.0 / counts[inverse]


def weighted_sample_indices(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` indices with replacement, proportional to ``weights``."""
    p = np.asarray(weights, dtype=float)
    return rng.choice(len(p), size=n, replace=True, p=p / p.sum())
