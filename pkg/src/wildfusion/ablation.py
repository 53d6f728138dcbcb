"""Metadata ablation: every (class subset x feature subset) trial, and win counting.

Canonical order: class subsets by size, then lexicographically; within each,
feature subsets by size, then by their sorted group names.
"""

from __future__ import annotations

import itertools
import logging
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .data.splits import Split, split_dataset
from .metadata import FeatureGroup, group_indices
from .metrics import cohen_kappa, overall_accuracy
from .models import FusionMode, FusionModelConfig, build_model
from .sampling import SmoteConfig, borderline_smote
from .training import ArrayDataset, TrainConfig, evaluate, train_model

log = logging.getLogger(__name__)


def subset_key(groups) -> tuple:
    """Canonical sort key and identity of a feature subset."""
    names = tuple(sorted(g.value for g in groups))
    return (len(names), names)


def subset_name(groups) -> str:
    return "+".join(subset_key(groups)[1])


def parse_subset_name(name: str) -> tuple:
    return tuple(sorted((FeatureGroup(v) for v in name.split("+")), key=lambda g: g.value))


@dataclass(frozen=True)
class Trial:
    class_subset: tuple
    feature_subset: tuple
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        if len(set(self.class_subset)) < 2:
            raise ValueError("a trial needs at least two classes")
        if not self.feature_subset:
            raise ValueError("a trial needs at least one feature group")

    @property
    def features(self) -> str:
        return subset_name(self.feature_subset)


@dataclass(frozen=True)
class TrialResult:
    trial: Trial
    accuracy: float
    kappa: float


def count_trials(n_classes: int, n_groups: int, min_subset: int = 2) -> int:
    """Closed form: (number of class subsets of size >= min_subset) x (2^groups - 1)."""
    class_subsets = sum(comb(n_classes, k) for k in range(min_subset, n_classes + 1))
    return class_subsets * (2**n_groups - 1)


def feature_subsets(groups) -> list[tuple]:
    groups = sorted(set(groups), key=lambda g: g.value)
    subsets = [c for k in range(1, len(groups) + 1) for c in itertools.combinations(groups, k)]
    return sorted(subsets, key=subset_key)


def class_subsets(classes, min_subset: int = 2) -> list[tuple]:
    classes = sorted(set(classes))
    return [c for k in range(min_subset, len(classes) + 1) for c in itertools.combinations(classes, k)]


def trial_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([global_seed, index]).generate_state(1)[0])


def iter_trials(classes, groups, min_subset: int = 2, seed: int = 0):
    if len(set(classes)) < 2:
        raise ValueError("need at least two classes")
    if not groups:
        raise ValueError("need at least one feature group")
    fsubs = feature_subsets(groups)
    index = 0
    for cs in class_subsets(classes, min_subset):
        for fs in fsubs:
            yield Trial(cs, fs, trial_seed(seed, index), index)
            index += 1


def enumerate_trials(classes, groups, min_subset: int = 2, seed: int = 0) -> list[Trial]:
    return list(iter_trials(classes, groups, min_subset, seed))


@dataclass
class TrialConfig:
    """Per-trial training budget; the step schedule is compressed to the shorter run."""

    epochs: int = 15
    batch_size: int = 64
    base_lr: float = 0.05
    momentum: float = 0.9
    lr_decay_period: int = 4
    lr_decay_factor: float = 0.1
    mlp_hidden: list = field(default_factory=lambda: [128, 64])
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    use_smote: bool = True


def prepare_trial_splits(trial: Trial, features: np.ndarray, labels, config: TrialConfig = TrialConfig()):
    """Filter, select feature groups, split, and oversample the training split only.

    Returns ``{"train": (X, y), "validation": (X, y), "test": (X, y)}`` with
    labels re-indexed to positions in ``trial.class_subset``.
    """
    labels = np.asarray(labels)
    present = set(labels.tolist())
    missing = [c for c in trial.class_subset if c not in present]
    if missing:
        raise ValueError(f"no samples for class(es) {missing}")
    keep = np.isin(labels, trial.class_subset)
    X = np.asarray(features, dtype=float)[keep][:, group_indices(trial.feature_subset)]
    lookup = {c: i for i, c in enumerate(trial.class_subset)}
    y = np.array([lookup[c] for c in labels[keep].tolist()], dtype=np.int64)

    tags = split_dataset(y, seed=trial.seed)
    parts = {s.value: np.flatnonzero(tags == s.value) for s in Split}
    out = {name: (X[idx], y[idx]) for name, idx in parts.items()}
    X_tr, y_tr = out["train"]
    if config.use_smote and len(np.unique(y_tr)) > 1:
        smote = SmoteConfig(config.smote.m_neighbors, config.smote.k_interp_neighbors, config.smote.synthetic_per_danger, trial.seed)
        X_syn, y_syn = borderline_smote(X_tr, y_tr, smote)
        out["train"] = (np.concatenate([X_tr, X_syn]), np.concatenate([y_tr, y_syn.astype(np.int64)]))
    return out


def run_trial(trial: Trial, features: np.ndarray, labels, config: TrialConfig = TrialConfig()) -> TrialResult:
    """Train the metadata MLP on one trial and score it on the held-out test split.

    ``features`` are full N x 538 metadata vectors; ``labels`` are class ids
    matching ``trial.class_subset``.  SMOTE touches the training split only.
    """
    parts = prepare_trial_splits(trial, features, labels, config)
    (X_tr, y_tr), (X_va, y_va), (X_te, y_te) = parts["train"], parts["validation"], parts["test"]
    model_cfg = FusionModelConfig(
        fusion_mode=FusionMode.METADATA_ONLY,
        metadata_dim=X_tr.shape[1],
        num_classes=len(trial.class_subset),
        mlp_hidden=list(config.mlp_hidden),
    )
    model = build_model(model_cfg, seed=trial.seed)
    train_cfg = TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        base_lr=config.base_lr,
        lr_decay_period=config.lr_decay_period,
        lr_decay_factor=config.lr_decay_factor,
        momentum=config.momentum,
        seed=trial.seed,
    )
    result = train_model(model, ArrayDataset(y_tr, metadata=X_tr), ArrayDataset(y_va, metadata=X_va), train_cfg)
    model.load_state_dict(result.best_state)
    cm = evaluate(model, ArrayDataset(y_te, metadata=X_te))
    try:
        kappa = cohen_kappa(cm)
    except ValueError:
        kappa = 0.0
    return TrialResult(trial, overall_accuracy(cm), kappa)


_WORKER_DATA: dict = {}


def _init_worker(features, labels, config):
    _WORKER_DATA.update(features=features, labels=labels, config=config)


def _run_in_worker(trial: Trial) -> TrialResult:
    d = _WORKER_DATA
    return run_trial(trial, d["features"], d["labels"], d["config"])


def run_trials(trials, features, labels, config: TrialConfig = TrialConfig(), workers: int | None = None, on_result=None) -> list[TrialResult]:
    """Run trials in canonical order; ``workers`` defaults to the core count."""
    trials = list(trials)
    workers = workers or os.cpu_count() or 1
    results = []
    if workers == 1 or len(trials) < 2:
        for t in trials:
            r = run_trial(t, features, labels, config)
            results.append(r)
            if on_result:
                on_result(r)
        return results
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(features, labels, config)) as pool:
        for r in pool.map(_run_in_worker, trials, chunksize=max(1, len(trials) // (workers * 8))):
            results.append(r)
            if on_result:
                on_result(r)
    return results


class ScoreBoard:
    """Win counts per feature subset, partitioned by subset cardinality."""

    def __init__(self, counts: dict | None = None):
        self.counts: dict[int, dict[str, int]] = defaultdict(dict)
        for card, row in (counts or {}).items():
            self.counts[int(card)] = dict(row)

    def award(self, cardinality: int, subset: str, points: int = 1) -> None:
        row = self.counts[cardinality]
        row[subset] = row.get(subset, 0) + points

    def total(self, cardinality: int) -> int:
        return sum(self.counts.get(cardinality, {}).values())

    def get(self, cardinality: int, subset: str) -> int:
        return self.counts.get(cardinality, {}).get(subset, 0)

    def merge(self, other: "ScoreBoard") -> "ScoreBoard":
        out = ScoreBoard(self.counts)
        for card, row in other.counts.items():
            for name, pts in row.items():
                out.award(card, name, pts)
        return out

    __add__ = merge

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreBoard):
            return NotImplemented
        norm = lambda c: {k: {n: p for n, p in v.items() if p} for k, v in c.items() if any(v.values())}  # noqa: E731
        return norm(self.counts) == norm(other.counts)

    def rows(self) -> list[tuple[int, str, int]]:
        return [
            (card, name, pts)
            for card in sorted(self.counts)
            for name, pts in sorted(self.counts[card].items(), key=lambda kv: (-kv[1], kv[0]))
        ]

    def to_table(self) -> str:
        lines = ["cardinality\tfeature_subset\twins"]
        lines += [f"{c}\t{n}\t{p}" for c, n, p in self.rows()]
        return "\n".join(lines) + "\n"


def counting_scores(results, groups=None, cardinalities=None) -> ScoreBoard:
    """One point per (class subset, cardinality) to the most accurate feature subset.

    Ties go to the earliest subset in canonical order and are logged.  Every
    feature subset of each scored cardinality must be present for every
    class subset, otherwise the missing pairs are reported.
    """
    results = list(results)
    if not results:
        raise ValueError("no trial results")
    universe = set(groups) if groups is not None else {g for r in results for g in r.trial.feature_subset}
    all_subsets = feature_subsets(universe)
    cards = sorted(set(cardinalities) if cardinalities is not None else {len(s) for s in all_subsets})
    by_class: dict[tuple, dict[tuple, TrialResult]] = defaultdict(dict)
    for r in results:
        by_class[tuple(r.trial.class_subset)][subset_key(r.trial.feature_subset)] = r
    missing = []
    for cs, row in by_class.items():
        for s in all_subsets:
            if len(s) in cards and subset_key(s) not in row:
                missing.append((cs, subset_name(s)))
    if missing:
        shown = ", ".join(f"{list(cs)} x {fs}" for cs, fs in missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        raise ValueError(f"incomplete coverage, missing {len(missing)} pair(s): {shown}{more}")
    board = ScoreBoard()
    for cs in sorted(by_class, key=lambda c: (len(c), c)):
        row = by_class[cs]
        for card in cards:
            cands = sorted((k for k in row if k[0] == card))
            best = max(row[k].accuracy for k in cands)
            winners = [k for k in cands if row[k].accuracy == best]
            if len(winners) > 1:
                log.info("tie for class subset %s at cardinality %d: %s -> %s", list(cs), card, ["+".join(w[1]) for w in winners], "+".join(winners[0][1]))
            board.award(card, "+".join(winners[0][1]))
    return board


def scores_by_class_count(results) -> list[dict]:
    """Mean accuracy and kappa per class-subset size (prediction score vs number of classes)."""
    acc, kap = defaultdict(list), defaultdict(list)
    for r in results:
        k = len(r.trial.class_subset)
        acc[k].append(r.accuracy)
        kap[k].append(r.kappa)
    return [
        {"num_classes": k, "trials": len(acc[k]), "mean_accuracy": float(np.mean(acc[k])), "mean_kappa": float(np.mean(kap[k]))}
        for k in sorted(acc)
    ]


def results_table(results, header_lines=()) -> str:
    lines = [f"# {h}" for h in header_lines]
    lines.append("index\tclasses\tfeatures\tseed\taccuracy\tkappa")
    for r in results:
        t = r.trial
        lines.append(f"{t.index}\t{','.join(map(str, t.class_subset))}\t{t.features}\t{t.seed}\t{r.accuracy:.6f}\t{r.kappa:.6f}")
    return "\n".join(lines) + "\n"


def parse_results_table(text: str) -> list[TrialResult]:
    out = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("index\t"):
            continue
        idx, classes, feats, seed, acc, kappa = line.split("\t")
        cs = tuple(_maybe_int(c) for c in classes.split(","))
        out.append(TrialResult(Trial(cs, parse_subset_name(feats), int(seed), int(idx)), float(acc), float(kappa)))
    return out


def _maybe_int(s: str):
    try:
        return int(s)
    except ValueError:
        return s

