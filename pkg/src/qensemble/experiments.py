"""Experiment harness: size sweep, repeated evaluation, single-vs-base curves.

Every run derives all randomness from one master seed, writes CSV output
plus a JSON manifest (config, derived seeds, sha256 of each file), and
saves the trained ensemble so `predict` can run without retraining.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import LabeledDataset, PcaModel, bootstrap_sample, fit_pca, load_mnist, split
from .ensemble import (
    STRATEGIES,
    EnsembleModel,
    StrategyConfig,
    build_ensemble,
    derive_seed,
    predict_ensemble,
)
from .qcnn import (
    QcnnArchitecture,
    architecture_description,
    build_qcnn,
    circuit_from_description,
    forward_batch,
)
from .training import (
    ConfusionMatrix,
    TrainConfig,
    TrainedLearner,
    encode_dataset,
    train,
)
from .training import predict as predict_single

MODEL_FORMAT_VERSION = 1


@dataclass
class ExperimentConfig:
    images_path: str
    labels_path: str
    output_dir: str
    digit_pair: tuple[int, int] = (0, 1)
    n_qubits: int = 4
    n_learners: int = 20
    strategies: tuple[str, ...] = STRATEGIES
    ladder: tuple[int, ...] = (5, 10, 15, 20)
    test_fraction: float = 0.3
    bootstrap_fraction: float = 1.0
    n_trials: int = 10
    trial_sample_size: int = 1000
    master_seed: int = 0
    n_workers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.trial_sample_size < 1:
            raise ValueError("trial_sample_size must be >= 1")
        if self.n_learners < 1:
            raise ValueError("n_learners must be >= 1")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")


@dataclass
class EvalReport:
    series: dict            # strategy -> list of (n_learners, accuracy)
    trial_accuracies: dict  # strategy -> list of per-trial accuracies
    mean_accuracy: dict     # strategy -> mean accuracy
    variance: dict          # strategy -> population variance of trial accuracies


def mean_variance(accuracies) -> tuple[float, float]:
    """Mean and population variance (1/n) of per-trial accuracies."""
    a = np.asarray(accuracies, dtype=np.float64)
    mean = float(a.mean())
    return mean, float(np.mean((a - mean) ** 2))


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def _write_manifest(out_dir, cfg: ExperimentConfig, seeds: dict, files: list,
                    extra: dict | None = None):
    manifest = {
        "config": asdict(cfg),
        "seeds": seeds,
        "files": {os.path.basename(p): _sha256(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
    return path


def prepare_data(cfg: ExperimentConfig):
    """Load, split, and fit PCA on the training split only."""
    dataset = load_mnist(cfg.images_path, cfg.labels_path, cfg.digit_pair)
    train_set, test_set = split(
        dataset, cfg.test_fraction, derive_seed(cfg.master_seed, "split")
    )
    pca = fit_pca(train_set, 2 ** cfg.n_qubits)
    arch, _ = build_qcnn(cfg.n_qubits)
    return train_set, test_set, pca, arch


def _build(cfg: ExperimentConfig, train_set, pca, arch) -> EnsembleModel:
    train_cfg = replace(cfg.train, seed=derive_seed(cfg.master_seed, "ensemble"))
    return build_ensemble(
        train_set, pca, cfg.n_learners, arch, train_cfg, cfg.strategy,
        bootstrap_fraction=cfg.bootstrap_fraction, n_workers=cfg.n_workers,
    )


def _train_single(cfg: ExperimentConfig, train_set, pca, arch) -> TrainedLearner:
    single_cfg = replace(cfg.train, seed=derive_seed(cfg.master_seed, "single"))
    return train(arch, train_set, pca, single_cfg)


def run_size_sweep(cfg: ExperimentConfig) -> EvalReport:
    """Test accuracy per strategy for growing prefixes of one trained ensemble."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    if max(cfg.ladder) > cfg.n_learners:
        raise ValueError("ladder entry exceeds n_learners")
    train_set, test_set, pca, arch = prepare_data(cfg)
    model = _build(cfg, train_set, pca, arch)

    series = {s: [] for s in cfg.strategies}
    rows = []
    for n in cfg.ladder:
        for strategy in cfg.strategies:
            preds = predict_ensemble(model, test_set, pca, strategy, n_learners=n)
            acc = float(np.mean(preds == test_set.labels))
            series[strategy].append((n, acc))
            rows.append((strategy, n, acc))

    csv_path = os.path.join(cfg.output_dir, "sweep.csv")
    _write_csv(csv_path, ("strategy", "n_learners", "accuracy"), rows)
    model_path = os.path.join(cfg.output_dir, "ensemble.json")
    save_ensemble(model_path, model, pca, cfg)
    _write_manifest(
        cfg.output_dir, cfg,
        {"split": derive_seed(cfg.master_seed, "split"),
         "ensemble": derive_seed(cfg.master_seed, "ensemble")},
        [csv_path, model_path],
    )
    return EvalReport(series, {}, {}, {})


def run_repeated_eval(cfg: ExperimentConfig) -> EvalReport:
    """Mean/variance of accuracy over seeded resamples of the test pool."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    train_set, test_set, pca, arch = prepare_data(cfg)
    if cfg.trial_sample_size > test_set.n_samples:
        raise ValueError(
            f"trial_sample_size {cfg.trial_sample_size} exceeds test pool "
            f"{test_set.n_samples}"
        )
    model = _build(cfg, train_set, pca, arch)
    single = _train_single(cfg, train_set, pca, arch)

    names = ("single",) + tuple(cfg.strategies)
    trial_accs = {name: [] for name in names}
    rows = []
    for t in range(cfg.n_trials):
        rng = np.random.default_rng(derive_seed(cfg.master_seed, "trial", t))
        idx = rng.choice(test_set.n_samples, size=cfg.trial_sample_size,
                         replace=False)
        sample = test_set.take(idx)
        preds = {"single": predict_single(single, sample, pca)}
        for strategy in cfg.strategies:
            preds[strategy] = predict_ensemble(model, sample, pca, strategy)
        for name in names:
            acc = float(np.mean(preds[name] == sample.labels))
            trial_accs[name].append(acc)
            rows.append((name, t, acc, ""))

    means, variances = {}, {}
    for name in names:
        means[name], variances[name] = mean_variance(trial_accs[name])
        rows.append((name, "mean", means[name], variances[name]))

    csv_path = os.path.join(cfg.output_dir, "repeat.csv")
    _write_csv(csv_path, ("strategy", "trial", "accuracy", "variance"), rows)
    model_path = os.path.join(cfg.output_dir, "ensemble.json")
    save_ensemble(model_path, model, pca, cfg)
    _write_manifest(
        cfg.output_dir, cfg,
        {"split": derive_seed(cfg.master_seed, "split"),
         "ensemble": derive_seed(cfg.master_seed, "ensemble"),
         "single": derive_seed(cfg.master_seed, "single")},
        [csv_path, model_path],
    )
    return EvalReport({}, trial_accs, means, variances)


def run_single_vs_base(cfg: ExperimentConfig):
    """Per-step loss and test accuracy for a full-data and a bootstrap learner."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    train_set, test_set, pca, arch = prepare_data(cfg)
    test_amps, test_labels, n_skipped = encode_dataset(test_set, pca)
    # zero-norm samples are predicted class 0; count them against the total
    n_zero_correct = int(np.sum(test_set.labels == 0)) - int(
        np.sum(test_labels == 0)
    ) if n_skipped else 0

    def curve(name, subset, seed):
        entries = []

        def callback(step, params, step_loss):
            probs = forward_batch(arch, params, test_amps)
            preds = (probs >= 0.5).astype(np.int64)
            acc = float(
                (np.sum(preds == test_labels) + n_zero_correct)
                / test_set.n_samples
            )
            entries.append((name, step, step_loss, acc))

        # a training curve is one optimization trajectory, so force a
        # single restart here
        train(arch, subset, pca, replace(cfg.train, seed=seed, n_restarts=1),
              step_callback=callback)
        return entries

    rows = curve("single", train_set, derive_seed(cfg.master_seed, "single"))
    subset = bootstrap_sample(
        train_set, cfg.bootstrap_fraction, derive_seed(cfg.master_seed, "bootstrap", 0)
    )
    rows += curve("base", subset, derive_seed(cfg.master_seed, "base"))

    csv_path = os.path.join(cfg.output_dir, "curves.csv")
    _write_csv(csv_path, ("learner", "step", "loss", "accuracy"), rows)
    _write_manifest(
        cfg.output_dir, cfg,
        {"split": derive_seed(cfg.master_seed, "split"),
         "single": derive_seed(cfg.master_seed, "single"),
         "base": derive_seed(cfg.master_seed, "base")},
        [csv_path],
    )
    return rows


def run_predict(model_path: str, cfg: ExperimentConfig,
                strategy: str = "confusion_matrix"):
    """Predict an IDX dataset with a saved ensemble; writes predictions.csv."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    model, pca, digit_pair = load_ensemble(model_path)
    dataset = load_mnist(cfg.images_path, cfg.labels_path, tuple(digit_pair))
    preds = predict_ensemble(model, dataset, pca, strategy)
    accuracy = float(np.mean(preds == dataset.labels))
    rows = [(i, int(y), int(p))
            for i, (y, p) in enumerate(zip(dataset.labels, preds))]
    csv_path = os.path.join(cfg.output_dir, "predictions.csv")
    _write_csv(csv_path, ("index", "true_label", "predicted"), rows)
    _write_manifest(cfg.output_dir, cfg, {}, [csv_path],
                    extra={"strategy": strategy, "accuracy": accuracy})
    return preds, accuracy


# ---------------------------------------------------------------------------
# model persistence

def save_ensemble(path, model: EnsembleModel, pca: PcaModel,
                  cfg: ExperimentConfig):
    arch = model.learners[0].arch
    record = {
        "format_version": MODEL_FORMAT_VERSION,
        "digit_pair": list(cfg.digit_pair),
        "arch": architecture_description(arch),
        "strategy_config": asdict(model.config),
        "pca": {
            "mean": pca.mean.tolist(),
            "components": pca.components.tolist(),
            "n_components": pca.n_components,
        },
        "similarity": model.pairwise_similarity.tolist(),
        "learners": [
            {
                "params": ln.params.tolist(),
                "train_accuracy": ln.train_accuracy,
                "confusion": asdict(ln.confusion),
                "s_max": ln.s_max,
                "loss_history": list(ln.loss_history),
                "skipped_train_samples": ln.skipped_train_samples,
            }
            for ln in model.learners
        ],
    }
    with open(path, "w") as f:
        json.dump(record, f, sort_keys=True)


def load_ensemble(path):
    with open(path) as f:
        record = json.load(f)
    if record.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {record.get('format_version')}")
    desc = record["arch"]
    circuit, readout = circuit_from_description(desc)
    arch = QcnnArchitecture(
        arch_id=desc["arch_id"],
        n_qubits=desc["n_qubits"],
        layers=(),
        readout_rotation_slot=None,
        readout_qubit=readout,
        total_params=desc["total_params"],
        circuit=circuit,
    )
    learners = [
        TrainedLearner(
            arch=arch,
            params=np.asarray(ln["params"], dtype=np.float64),
            train_accuracy=ln["train_accuracy"],
            confusion=ConfusionMatrix(**ln["confusion"]),
            s_max=ln["s_max"],
            loss_history=list(ln["loss_history"]),
            skipped_train_samples=ln["skipped_train_samples"],
        )
        for ln in record["learners"]
    ]
    model = EnsembleModel(
        learners,
        np.asarray(record["similarity"], dtype=np.float64),
        StrategyConfig(**record["strategy_config"]),
    )
    pca = PcaModel(
        np.asarray(record["pca"]["mean"]),
        np.asarray(record["pca"]["components"]),
        record["pca"]["n_components"],
    )
    return model, pca, record["digit_pair"]
