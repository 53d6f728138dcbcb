"""Stratified nested 90/10 splits (test first, then validation) -> 81/9/10."""

from __future__ import annotations

import enum
import logging

import numpy as np

log = logging.getLogger(__name__)

HOLDOUT_FRACTION = 0.1


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


def _apportion(quotas: np.ndarray, total: int, caps: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding of ``quotas`` to integers summing to ``total``."""
    base = np.minimum(np.floor(quotas).astype(int), caps)
    short = total - base.sum()
    frac = quotas - np.floor(quotas)
    # Largest remainder first, lower class position on ties.
    for i in sorted(range(len(quotas)), key=lambda i: (-frac[i], i)):
        if short <= 0:
            break
        if base[i] < caps[i]:
            base[i] += 1
            short -= 1
    return base


def split_dataset(labels, seed: int = 0, fraction: float = HOLDOUT_FRACTION) -> np.ndarray:
    """Per-sample split tags (``Split`` values), stratified by class and deterministic in ``seed``."""
    labels = np.asarray(labels)
    n = len(labels)
    if n < 10:
        raise ValueError(f"need at least 10 records to split, got {n}")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    for c, k in zip(classes, counts):
        if k < 3:
            log.warning("class %s has only %d sample(s); split is best effort", c, k)
    n_test = int(np.floor(fraction * n + 0.5))
    test_per = _apportion(fraction * counts, n_test, counts)
    rest = counts - test_per
    n_val = int(np.floor(fraction * rest.sum() + 0.5))
    val_per = _apportion(fraction * rest, n_val, rest)

    rng = np.random.default_rng(seed)
    tags = np.empty(n, dtype="<U10")
    for ci in range(len(classes)):
        idx = np.flatnonzero(inverse == ci)
        idx = idx[rng.permutation(len(idx))]
        t, v = test_per[ci], val_per[ci]
        tags[idx[:t]] = Split.TEST.value
        tags[idx[t : t + v]] = Split.VALIDATION.value
        tags[idx[t + v :]] = Split.TRAIN.value
    return tags


def split_indices(tags) -> dict:
    tags = np.asarray(tags)
    return {s.value: np.flatnonzero(tags == s.value) for s in Split}
