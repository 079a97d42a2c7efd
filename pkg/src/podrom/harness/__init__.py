"""Measurement harness: error series, bound audits, studies, experiments, CLI."""

from .audits import (
    BoundAuditEntry,
    BoundAuditReport,
    audit_max_dif,
    audit_tail_identity,
    poincare_constant_unit_square,
)
from .config import ExperimentConfig, load_config, parse_config_text
from .experiment import prepare_setup, run_experiment, run_sweep
from .series import ErrorSeries, error_series, sample_times
from .studies import ConvergenceStudy, convergence_study, spacing_order_study, temporal_floor

__all__ = [
    "BoundAuditEntry", "BoundAuditReport", "audit_max_dif",
    "audit_tail_identity", "poincare_constant_unit_square",
    "ExperimentConfig", "load_config", "parse_config_text",
    "prepare_setup", "run_experiment", "run_sweep",
    "ErrorSeries", "error_series", "sample_times",
    "ConvergenceStudy", "convergence_study", "spacing_order_study",
    "temporal_floor",
]
