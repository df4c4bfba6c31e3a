"""Empirical null estimation, level adjustment and loss-based screening for genome-scale confidence levels."""

__version__ = "0.1.0"

from .benefit import BenefitCurve, benefit_curve, denull, renyi_half
from .levels import ConfidenceVector, FeatureTable, complement, levels_from_table
from .nullmodel import NullModel, adjust_level, adjust_vector, fit_null
from .screening import DecisionReport, LossParams, brute_force_decisions, expected_loss, optimize_decisions
from .simstudy import StudyConfig, run_study

__all__ = [
    "BenefitCurve",
    "ConfidenceVector",
    "DecisionReport",
    "FeatureTable",
    "LossParams",
    "NullModel",
    "StudyConfig",
    "adjust_level",
    "adjust_vector",
    "benefit_curve",
    "brute_force_decisions",
    "complement",
    "denull",
    "expected_loss",
    "fit_null",
    "levels_from_table",
    "optimize_decisions",
    "renyi_half",
    "run_study",
]
