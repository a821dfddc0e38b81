"""Hybrid quantum-classical ensemble classification.

Simulated variational QCNN base learners trained on bootstrap subsets of a
binarized, PCA-reduced digit dataset, combined by majority voting,
accuracy-weighted voting, or confusion-matrix weighting with a similarity
penalty.
"""
from .data import (
    EmptyDatasetError,
    FeatureVector,
    IdxFormatError,
    LabeledDataset,
    PcaModel,
    RankDeficiencyError,
    apply_pca,
    bootstrap_sample,
    fit_pca,
    load_mnist,
    split,
)
from .ensemble import (
    STRATEGIES,
    EnsembleModel,
    StrategyConfig,
    VotingRecord,
    WeightingError,
    build_ensemble,
    combine,
    compute_s_max,
    ensemble_error_rate,
    pairwise_similarity,
    predict_ensemble,
    similarity_interval,
    vote_weight,
)
from .qcnn import QcnnArchitecture, build_qcnn, forward
from .sim import (
    EncodingError,
    Gate,
    GateKind,
    ParameterizedCircuit,
    Statevector,
    amplitude_encode,
    apply_gate,
    measure_prob,
    run_circuit,
)
from .training import (
    ConfusionMatrix,
    TrainConfig,
    TrainedLearner,
    TrainingError,
    evaluate,
    gradient,
    loss,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
