"""L_q-norm tests for zero alphas in high-dimensional factor pricing models."""

from alphaq.estimator import LqAlphaTest
from alphaq.experiments import ExperimentSpec, RejectionTable, run_power_curve, run_size_table
from alphaq.regression import FactorPanel, RegressionFit, ReturnPanel, fit_regression, residual_weight_vector
from alphaq.simulation import AlphaSpec, SimConfig, SimulatedPanel, simulate_panel
from alphaq.statistics import (
    BMatrix,
    CorrelationAggregates,
    TestReport,
    build_B,
    cauchy_combination,
    compute_Q,
    max_test,
    minp_combination,
    residual_correlation_aggregates,
    run_alpha_tests,
    standardize,
    threshold_level,
)

__version__ = "0.1.0"

__all__ = [
    "LqAlphaTest",
    "ReturnPanel",
    "FactorPanel",
    "RegressionFit",
    "fit_regression",
    "residual_weight_vector",
    "CorrelationAggregates",
    "BMatrix",
    "TestReport",
    "compute_Q",
    "threshold_level",
    "residual_correlation_aggregates",
    "build_B",
    "standardize",
    "max_test",
    "cauchy_combination",
    "minp_combination",
    "run_alpha_tests",
    "SimConfig",
    "AlphaSpec",
    "SimulatedPanel",
    "simulate_panel",
    "ExperimentSpec",
    "RejectionTable",
    "run_size_table",
    "run_power_curve",
]
