"""Orchestration: personalized training sets, experiments, the monitoring
cascade and result files."""

from ..metrics import Metrics, confusion, evaluate, f1_score, macro_average, pooled
from .cascade import (CascadeConfig, CascadeReport, calibrate_cascade,
                      cascade_decisions, crossfit_energies, ensemble_path_flops,
                      flops_saved, route, run_cascade, sweep_cascade)
from .datasets import (STRATEGIES, StrategyConfig, TrainingPool, UserModel,
                       build_training_set, compose_training_set, fit_user_model,
                       prepare_pool, segment_corpus, split_train_val,
                       stratified_split_indices)
from .experiment import (SYSTEMS, ExperimentConfig, ExperimentResult,
                         PatientResult, RunResult, run_experiment,
                         run_patient_experiment)

__all__ = [
    "STRATEGIES", "SYSTEMS", "CascadeConfig", "CascadeReport",
    "ExperimentConfig", "ExperimentResult", "Metrics", "PatientResult",
    "RunResult", "StrategyConfig", "TrainingPool", "UserModel",
    "build_training_set", "calibrate_cascade", "cascade_decisions",
    "crossfit_energies",
    "compose_training_set", "confusion", "ensemble_path_flops", "evaluate",
    "f1_score", "fit_user_model", "flops_saved", "macro_average", "pooled",
    "prepare_pool", "route", "run_cascade", "run_experiment",
    "run_patient_experiment", "segment_corpus", "split_train_val",
    "stratified_split_indices", "sweep_cascade",
]
