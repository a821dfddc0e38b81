"""Base-learner training: cross-entropy loss, parameter-shift gradients, Adam."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset, PcaModel
from .qcnn import QcnnArchitecture, forward_batch
from .sim import CONTROLLED_ROTATION_KINDS, measure_prob_batch, run_circuit_batch

logger = logging.getLogger(__name__)

PROB_EPS = 1e-10

# two-point rule for RX/RY/RZ (generator eigenvalues +-1/2)
_TWO_POINT = ((np.pi / 2, 0.5), (-np.pi / 2, -0.5))
# four-point rule for controlled rotations (generator eigenvalues {0, +-1/2})
_C_PLUS = (np.sqrt(2.0) + 1.0) / (4.0 * np.sqrt(2.0))
_C_MINUS = (np.sqrt(2.0) - 1.0) / (4.0 * np.sqrt(2.0))
_FOUR_POINT = (
    (np.pi / 2, _C_PLUS),
    (-np.pi / 2, -_C_PLUS),
    (3 * np.pi / 2, -_C_MINUS),
    (-3 * np.pi / 2, _C_MINUS),
)


class TrainingError(RuntimeError):
    """Training cannot proceed (e.g. no encodable samples)."""


@dataclass
class TrainConfig:
    max_steps: int = 400
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    init_scale: float = 0.2
    n_restarts: int = 2

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0 or self.init_scale <= 0:
            raise ValueError("learning_rate and init_scale must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


@dataclass
class ConfusionMatrix:
    """Binary-classification counts: true class by row, prediction by column."""

    tn: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("empty confusion matrix has no accuracy")
        return (self.tn + self.tp) / self.total


@dataclass
class TrainedLearner:
    arch: QcnnArchitecture
    params: np.ndarray
    train_accuracy: float
    confusion: ConfusionMatrix
    s_max: float | None = None
    loss_history: list = field(default_factory=list)
    skipped_train_samples: int = 0

    @property
    def arch_id(self) -> str:
        return self.arch.arch_id


def loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty batch")
    if p.shape != y.shape:
        raise ValueError("probabilities and labels must have equal length")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def encode_dataset(dataset: LabeledDataset, pca: PcaModel):
    """PCA-project and amplitude-encode all samples.

    Returns (amps, labels, n_skipped): rows with zero norm after PCA cannot
    be encoded and are dropped.
    """
    X = pca.transform(dataset.features)
    norms = np.linalg.norm(X, axis=1)
    mask = norms > 0.0
    amps = (X[mask] / norms[mask, None]).astype(np.complex128)
    return amps, dataset.labels[mask].copy(), int((~mask).sum())


def _shift_plan(arch: QcnnArchitecture):
    plan = []
    for gi, gate in enumerate(arch.circuit.gates):
        if gate.param_slot is None:
            continue
        rule = _FOUR_POINT if gate.kind in CONTROLLED_ROTATION_KINDS else _TWO_POINT
        for delta, coeff in rule:
            plan.append((gi, gate.param_slot, delta, coeff))
    return plan


def gradient(arch: QcnnArchitecture, params: np.ndarray,
             encoded: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(loss)/d(params) via the parameter-shift rule.

    encoded is a (batch, 2^n) array of amplitude-encoded states. Each
    parametric gate occurrence is shifted individually, so slots referenced
    by several gates accumulate correctly.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.total_params,):
        raise ValueError(f"expected {arch.total_params} parameters")
    batch = encoded.shape[0]
    if batch == 0:
        raise ValueError("empty batch")
    y = np.asarray(labels, dtype=np.float64)

    p = forward_batch(arch, params, encoded)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    dldp = (pc - y) / (pc * (1.0 - pc)) / batch

    plan = _shift_plan(arch)
    n_shifts = len(plan)
    n_gates = len(arch.circuit.gates)

    mega = np.tile(encoded, (n_shifts, 1))
    offsets = np.zeros((n_shifts * batch, n_gates))
    for s, (gi, _, delta, _) in enumerate(plan):
        offsets[s * batch:(s + 1) * batch, gi] = delta
    out = run_circuit_batch(arch.circuit, params, mega, angle_offsets=offsets)
    probs = measure_prob_batch(out, arch.readout_qubit, arch.n_qubits)
    probs = probs.reshape(n_shifts, batch)

    dp = np.zeros((arch.total_params, batch))
    for s, (_, slot, _, coeff) in enumerate(plan):
        dp[slot] += coeff * probs[s]
    return dp @ dldp


def _adam_run(arch, amps, labels, cfg: TrainConfig, rng, step_callback):
    params = rng.uniform(-cfg.init_scale, cfg.init_scale, arch.total_params)
    # Adam (beta1=0.9, beta2=0.999, eps=1e-8)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    n = amps.shape[0]
    loss_history: list[float] = []
    for step in range(cfg.max_steps):
        idx = rng.integers(0, n, size=cfg.batch_size)
        batch_amps, batch_y = amps[idx], labels[idx]
        step_loss = loss(forward_batch(arch, params, batch_amps), batch_y)
        loss_history.append(step_loss)
        g = gradient(arch, params, batch_amps, batch_y)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** (step + 1))
        v_hat = v / (1.0 - beta2 ** (step + 1))
        params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        if step_callback is not None:
            step_callback(step, params, step_loss)
    final_loss = loss(forward_batch(arch, params, amps), labels)
    return final_loss, params, loss_history


def train(arch: QcnnArchitecture, subset: LabeledDataset, pca: PcaModel,
          cfg: TrainConfig, step_callback=None) -> TrainedLearner:
    """Minibatch Adam on binary cross-entropy; deterministic given cfg.seed.

    Runs cfg.n_restarts independent Adam runs from fresh random
    initializations (all drawn from the same seeded stream) and keeps the
    one with the lowest full-subset loss; its loss history is the one
    recorded on the learner, and step_callback sees every run.
    """
    if pca.n_components != 2 ** arch.n_qubits:
        raise ValueError("PCA output width must be 2^n_qubits")
    amps, labels, n_skipped = encode_dataset(subset, pca)
    if amps.shape[0] == 0:
        raise TrainingError("all samples have zero norm after PCA")
    if n_skipped:
        logger.warning("skipped %d zero-norm samples during training", n_skipped)

    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.n_restarts):
        run = _adam_run(arch, amps, labels, cfg, rng, step_callback)
        if best is None or run[0] < best[0]:
            best = run
    _, params, loss_history = best

    accuracy, confusion, _ = _evaluate_encoded(arch, params, amps, labels, 0)
    return TrainedLearner(
        arch=arch,
        params=params,
        train_accuracy=accuracy,
        confusion=confusion,
        loss_history=loss_history,
        skipped_train_samples=n_skipped,
    )


def _evaluate_encoded(arch, params, amps, labels, n_zero_norm):
    probs = forward_batch(arch, params, amps) if amps.shape[0] else np.empty(0)
    preds = (probs >= 0.5).astype(np.int64)  # tie at 0.5 -> class 1
    if n_zero_norm:
        # unencodable samples are predicted as class 0
        preds = np.concatenate([preds, np.zeros(n_zero_norm, dtype=np.int64)])
    y = np.asarray(labels)
    confusion = ConfusionMatrix(
        tn=int(np.sum((preds == 0) & (y == 0))),
        fp=int(np.sum((preds == 1) & (y == 0))),
        fn=int(np.sum((preds == 0) & (y == 1))),
        tp=int(np.sum((preds == 1) & (y == 1))),
    )
    return confusion.accuracy, confusion, preds


def predict(learner: TrainedLearner, dataset: LabeledDataset,
            pca: PcaModel) -> np.ndarray:
    """Class predictions aligned with dataset rows (zero-norm rows -> class 0)."""
    X = pca.transform(dataset.features)
    norms = np.linalg.norm(X, axis=1)
    mask = norms > 0.0
    preds = np.zeros(dataset.n_samples, dtype=np.int64)
    if not mask.all():
        logger.warning(
            "predicting class 0 for %d zero-norm samples", int((~mask).sum())
        )
    if mask.any():
        amps = (X[mask] / norms[mask, None]).astype(np.complex128)
        probs = forward_batch(learner.arch, learner.params, amps)
        preds[mask] = (probs >= 0.5).astype(np.int64)
    return preds


def evaluate(learner: TrainedLearner, dataset: LabeledDataset, pca: PcaModel):
    """(accuracy, confusion matrix, predictions) on a dataset."""
    preds = predict(learner, dataset, pca)
    y = dataset.labels
    confusion = ConfusionMatrix(
        tn=int(np.sum((preds == 0) & (y == 0))),
        fp=int(np.sum((preds == 1) & (y == 0))),
        fn=int(np.sum((preds == 0) & (y == 1))),
        tp=int(np.sum((preds == 1) & (y == 1))),
    )
    return confusion.accuracy, confusion, preds
