"""Command-line harness: sweep, repeat, single-vs-base, predict."""
from __future__ import annotations

import argparse
import sys

from .ensemble import STRATEGIES, StrategyConfig
from .experiments import (
    ExperimentConfig,
    run_predict,
    run_repeated_eval,
    run_single_vs_base,
    run_size_sweep,
)
from .training import TrainConfig

_INT_PAIR = ("digit_pair",)
_INT_TUPLES = ("ladder",)
_STR_TUPLES = ("strategies",)
_INTS = ("n_qubits", "n_learners", "n_trials", "trial_sample_size",
         "master_seed", "n_workers", "max_steps", "batch_size", "seed",
         "n_restarts", "similarity_sample_size")
_FLOATS = ("test_fraction", "bootstrap_fraction", "learning_rate",
           "init_scale", "s_threshold", "accuracy_threshold")
_TRAIN_KEYS = ("max_steps", "batch_size", "learning_rate", "seed",
               "init_scale", "n_restarts")
_STRATEGY_KEYS = ("s_threshold", "accuracy_threshold", "log_base",
                  "similarity_sample_size")


def _coerce(key: str, value: str):
    if key in _INT_PAIR:
        a, b = value.split(",")
        return (int(a), int(b))
    if key in _INT_TUPLES:
        return tuple(int(v) for v in value.split(","))
    if key in _STR_TUPLES:
        return tuple(value.split(","))
    if key in _INTS:
        return int(value)
    if key in _FLOATS:
        return float(value)
    return value


def _read_config_file(path: str) -> dict:
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = _coerce(key, value)
    return values


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--images", dest="images_path", help="IDX image file")
    p.add_argument("--labels", dest="labels_path", help="IDX label file")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--digit-pair", dest="digit_pair", help="e.g. 0,1")
    p.add_argument("--n-qubits", dest="n_qubits")
    p.add_argument("--n-learners", dest="n_learners")
    p.add_argument("--strategies", help="comma list of strategies")
    p.add_argument("--ladder", help="comma list of ensemble sizes for sweep")
    p.add_argument("--test-fraction", dest="test_fraction")
    p.add_argument("--bootstrap-fraction", dest="bootstrap_fraction")
    p.add_argument("--n-trials", dest="n_trials")
    p.add_argument("--trial-sample-size", dest="trial_sample_size")
    p.add_argument("--master-seed", dest="master_seed")
    p.add_argument("--n-workers", dest="n_workers")
    p.add_argument("--max-steps", dest="max_steps")
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--learning-rate", dest="learning_rate")
    p.add_argument("--init-scale", dest="init_scale")
    p.add_argument("--n-restarts", dest="n_restarts")
    p.add_argument("--s-threshold", dest="s_threshold")
    p.add_argument("--accuracy-threshold", dest="accuracy_threshold")
    p.add_argument("--log-base", dest="log_base", choices=("natural", "base10"))
    p.add_argument("--similarity-sample-size", dest="similarity_sample_size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qensemble",
        description="Bagged QCNN ensemble classification experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("sweep", "accuracy vs number of base learners, per strategy"),
        ("repeat", "mean/variance of accuracy over repeated test resamples"),
        ("single-vs-base", "loss/accuracy curves: full-data vs bootstrap learner"),
        ("predict", "predict a dataset with a saved ensemble"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common_flags(p)
        if name == "predict":
            p.add_argument("--model", required=True, help="saved ensemble.json")
            p.add_argument("--strategy", default="confusion_matrix",
                           choices=STRATEGIES)
    return parser


def _build_config(args) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(_read_config_file(args.config))
    for key in ("images_path", "labels_path", "output_dir", "digit_pair",
                "n_qubits", "n_learners", "strategies", "ladder",
                "test_fraction", "bootstrap_fraction", "n_trials",
                "trial_sample_size", "master_seed", "n_workers",
                *_TRAIN_KEYS, *_STRATEGY_KEYS):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag) if isinstance(flag, str) else flag

    for required in ("images_path", "labels_path", "output_dir"):
        if required not in values:
            raise ValueError(f"missing required setting: {required}")

    train_kwargs = {k: values.pop(k) for k in list(values) if k in _TRAIN_KEYS}
    strategy_kwargs = {k: values.pop(k) for k in list(values) if k in _STRATEGY_KEYS}
    return ExperimentConfig(
        train=TrainConfig(**train_kwargs),
        strategy=StrategyConfig(**strategy_kwargs),
        **values,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "sweep":
            run_size_sweep(cfg)
        elif args.command == "repeat":
            run_repeated_eval(cfg)
        elif args.command == "single-vs-base":
            run_single_vs_base(cfg)
        else:
            _, accuracy = run_predict(args.model, cfg, strategy=args.strategy)
            print(f"accuracy: {accuracy}")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
