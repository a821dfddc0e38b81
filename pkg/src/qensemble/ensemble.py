"""Bagging orchestration, pairwise similarity, and combination strategies.

Strategies:
- majority: every learner votes with weight 1
- accuracy_weighted: weight = learner accuracy on the probe set
- confusion_matrix: weight = acc * (column ratios of the confusion matrix
  for the predicted class) * a similarity penalty; the penalty is
  -log(S_max) when the learner's max similarity to any later learner
  exceeds s_threshold (or S_max itself if the learner's accuracy exceeds
  accuracy_threshold), and 1 otherwise
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import LabeledDataset, PcaModel, bootstrap_sample
from .qcnn import QcnnArchitecture
from .training import (
    ConfusionMatrix,
    TrainConfig,
    TrainedLearner,
    TrainingError,
    predict,
    train,
)

STRATEGIES = ("majority", "accuracy_weighted", "confusion_matrix")

_UNSET = object()


class WeightingError(ValueError):
    """A voting weight cannot be computed (empty confusion matrix)."""


@dataclass
class StrategyConfig:
    s_threshold: float = 0.9
    accuracy_threshold: float = 0.92
    log_base: str = "natural"  # or "base10"
    similarity_sample_size: int = 500

    def __post_init__(self):
        if not 0.0 < self.s_threshold < 1.0:
            raise ValueError("s_threshold must be in (0, 1)")
        if not 0.0 < self.accuracy_threshold < 1.0:
            raise ValueError("accuracy_threshold must be in (0, 1)")
        if self.log_base not in ("natural", "base10"):
            raise ValueError("log_base must be 'natural' or 'base10'")
        if self.similarity_sample_size < 1:
            raise ValueError("similarity_sample_size must be >= 1")

    def log(self, x: float) -> float:
        return math.log(x) if self.log_base == "natural" else math.log10(x)


@dataclass
class VotingRecord:
    learner_index: int
    predicted_class: int
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.predicted_class not in (0, 1):
            raise ValueError("predicted_class must be 0 or 1")


@dataclass
class EnsembleModel:
    learners: list[TrainedLearner]
    pairwise_similarity: np.ndarray
    config: StrategyConfig

    def __post_init__(self):
        n = len(self.learners)
        sim = np.asarray(self.pairwise_similarity, dtype=np.float64)
        if sim.shape != (n, n):
            raise ValueError("similarity matrix must be N x N")
        if not np.allclose(sim, sim.T, atol=1e-12):
            raise ValueError("similarity matrix must be symmetric")
        if not np.allclose(np.diag(sim), 1.0, atol=1e-12):
            raise ValueError("similarity diagonal must be 1")
        self.pairwise_similarity = sim

    @property
    def n_learners(self) -> int:
        return len(self.learners)


def derive_seed(master_seed: int, purpose: str, index: int = 0) -> int:
    """Stable per-purpose child seed from one master seed."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(purpose.encode()), index])
    return int(ss.generate_state(1)[0])


def pairwise_similarity(learner_a: TrainedLearner, learner_b: TrainedLearner,
                        probe_set: LabeledDataset, pca: PcaModel) -> float:
    """Fraction of probe samples where the two learners' predictions agree."""
    pa = predict(learner_a, probe_set, pca)
    pb = predict(learner_b, probe_set, pca)
    return float(np.mean(pa == pb))


def compute_s_max(index: int, model: EnsembleModel) -> float | None:
    """Max similarity between learner `index` and any later learner.

    None for the last learner (no later learner; it stays unpenalized).
    """
    n = model.n_learners
    if not 0 <= index < n:
        raise ValueError(f"learner index {index} out of range")
    if index == n - 1:
        return None
    return float(np.max(model.pairwise_similarity[index, index + 1:]))


def _penalty_factor(s_max: float | None, accuracy: float, cfg: StrategyConfig) -> float:
    if s_max is None or s_max <= cfg.s_threshold:
        return 1.0
    if accuracy > cfg.accuracy_threshold:
        return s_max
    return -cfg.log(s_max)


def vote_weight(learner: TrainedLearner, predicted_class: int,
                cfg: StrategyConfig, s_max=_UNSET) -> float:
    """Confusion-matrix voting weight for one learner and one predicted class.

    Ratios with a zero denominator contribute 0. s_max defaults to the
    value stored on the learner; pass it explicitly to evaluate a prefix
    sub-ensemble.
    """
    cm = learner.confusion
    if cm.total == 0:
        raise WeightingError("confusion matrix is empty")
    if s_max is _UNSET:
        s_max = learner.s_max

    def ratio(num: int, den: int) -> float:
        return num / den if den > 0 else 0.0

    if predicted_class == 0:
        base = ratio(cm.tn, cm.tn + cm.fn) + ratio(cm.tn, cm.tn + cm.fp)
    else:
        base = ratio(cm.tp, cm.tp + cm.fp) + ratio(cm.tp, cm.tp + cm.fn)
    acc = learner.train_accuracy
    return acc * base * _penalty_factor(s_max, acc, cfg) + 0.0  # -0.0 -> 0.0


def combine(predictions: list[VotingRecord], strategy: str) -> int:
    """Class with the larger weight sum; ties go to class 0."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not predictions:
        raise ValueError("no voting records")
    score = [0.0, 0.0]
    for rec in predictions:
        score[rec.predicted_class] += rec.weight
    return 1 if score[1] > score[0] else 0


def _learner_weights(model: EnsembleModel, strategy: str, n_active: int):
    """Per-learner (weight-if-predicts-0, weight-if-predicts-1) arrays."""
    w0 = np.ones(n_active)
    w1 = np.ones(n_active)
    for i, learner in enumerate(model.learners[:n_active]):
        if strategy == "majority":
            continue
        if strategy == "accuracy_weighted":
            w0[i] = w1[i] = learner.train_accuracy
        else:
            if i == n_active - 1:
                s_max = None
            else:
                s_max = float(
                    np.max(model.pairwise_similarity[i, i + 1:n_active])
                )
            w0[i] = vote_weight(learner, 0, model.config, s_max=s_max)
            w1[i] = vote_weight(learner, 1, model.config, s_max=s_max)
    return w0, w1


def predict_ensemble(model: EnsembleModel, dataset: LabeledDataset,
                     pca: PcaModel, strategy: str,
                     n_learners: int | None = None) -> np.ndarray:
    """Combined predictions using the first n_learners learners."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    n_active = model.n_learners if n_learners is None else n_learners
    if not 1 <= n_active <= model.n_learners:
        raise ValueError("n_learners out of range")
    preds = np.stack(
        [predict(ln, dataset, pca) for ln in model.learners[:n_active]]
    )  # (n_active, n_samples)
    w0, w1 = _learner_weights(model, strategy, n_active)
    weights = np.where(preds == 1, w1[:, None], w0[:, None])
    score1 = np.sum(weights * (preds == 1), axis=0)
    score0 = np.sum(weights * (preds == 0), axis=0)
    return (score1 > score0).astype(np.int64)


def _train_indexed(args):
    index, arch, subset, cfg, pca = args
    try:
        return train(arch, subset, pca, cfg)
    except Exception as exc:
        raise TrainingError(f"learner {index}: {exc}") from exc


def build_ensemble(train_set: LabeledDataset, pca: PcaModel, n_learners: int,
                   arch: QcnnArchitecture, train_cfg: TrainConfig,
                   strategy_cfg: StrategyConfig, bootstrap_fraction: float = 0.2,
                   n_workers: int = 1) -> EnsembleModel:
    """Bag n_learners QCNNs and fill probe accuracies, confusions, similarities.

    All randomness derives from train_cfg.seed (the master seed): bootstrap
    subsets, per-learner training seeds, and the shared probe set.
    """
    if n_learners < 1:
        raise ValueError("n_learners must be >= 1")
    master = train_cfg.seed
    jobs = []
    for i in range(n_learners):
        subset = bootstrap_sample(
            train_set, bootstrap_fraction, derive_seed(master, "bootstrap", i)
        )
        cfg_i = replace(train_cfg, seed=derive_seed(master, "train", i))
        jobs.append((i, arch, subset, cfg_i, pca))

    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            learners = list(pool.map(_train_indexed, jobs))
    else:
        learners = [_train_indexed(job) for job in jobs]

    # shared probe set so accuracies and similarities are comparable
    rng = np.random.default_rng(derive_seed(master, "probe"))
    size = strategy_cfg.similarity_sample_size
    probe_idx = rng.choice(
        train_set.n_samples, size=size, replace=size > train_set.n_samples
    )
    probe = train_set.take(probe_idx)

    probe_preds = np.stack([predict(ln, probe, pca) for ln in learners])
    y = probe.labels
    for learner, preds in zip(learners, probe_preds):
        cm = ConfusionMatrix(
            tn=int(np.sum((preds == 0) & (y == 0))),
            fp=int(np.sum((preds == 1) & (y == 0))),
            fn=int(np.sum((preds == 0) & (y == 1))),
            tp=int(np.sum((preds == 1) & (y == 1))),
        )
        learner.confusion = cm
        learner.train_accuracy = cm.accuracy

    agree = (probe_preds[:, None, :] == probe_preds[None, :, :]).mean(axis=2)
    np.fill_diagonal(agree, 1.0)
    agree = (agree + agree.T) / 2.0  # exact symmetry

    model = EnsembleModel(learners, agree, strategy_cfg)
    for i, learner in enumerate(learners):
        learner.s_max = compute_s_max(i, model)
    return model


def ensemble_error_rate(p: float, n: int) -> float:
    """Error rate of a majority vote over n independent voters of accuracy p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if n < 1 or n % 2 == 0:
        raise ValueError("n must be an odd positive integer")
    return float(sum(
        math.comb(n, k) * p ** k * (1.0 - p) ** (n - k)
        for k in range(n // 2 + 1)
    ))


def similarity_interval(acc1: float, acc2: float) -> tuple[float, float]:
    """Attainable similarity range for two classifiers of given accuracies."""
    if not 0.5 <= acc1 <= acc2 <= 1.0:
        raise ValueError("need 0.5 <= acc1 <= acc2 <= 1")
    lo = acc1 - (1.0 - acc2)
    hi = acc1 + (1.0 - acc2)
    return max(lo, 0.0), min(hi, 1.0)
