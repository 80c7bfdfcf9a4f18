"""Experiment orchestration, synthetic data, reports and deployment bundles."""

from .bundle import (BundleError, DeploymentBundle, ReadStats, classify_csv, export_bundle,
                     train_for_record)
from .experiment import (ExperimentConfig, ResultRecord, default_k_grid, execute,
                         run_experiment)
from .reports import best_results_table, emit_reports
from .synthetic import generate_planted_dataset

__all__ = [
    "BundleError", "DeploymentBundle", "ExperimentConfig", "ReadStats", "ResultRecord", "best_results_table",
    "classify_csv", "default_k_grid", "emit_reports", "execute", "export_bundle",
    "generate_planted_dataset", "run_experiment", "train_for_record",
]
