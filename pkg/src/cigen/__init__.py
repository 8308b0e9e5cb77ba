"""Conditional independence testing with adversarially generated null samples."""

from .bench import BenchPlan, BenchTable, lambda_sweep, run_plan, tv_lower_bound
from .crt import crt_test, fit_gaussian_conditional
from .engine import TestConfig, TestResult, calibrate_lambda, empirical_p_value, gcit_test
from .gan import GanConfig, NullSampler, train_null_sampler
from .infonet import fit_and_estimate
from .stats import distance_correlation, ks_independence, mmd_dependence, pearson, rdc
from .synth import Dataset, SynthSpec, gaussian_mi_proxy, generate, generate_mi_controlled

__version__ = "0.1.0"

__all__ = [
    "BenchPlan", "BenchTable", "Dataset", "GanConfig", "NullSampler",
    "SynthSpec", "TestConfig", "TestResult", "calibrate_lambda", "crt_test",
    "distance_correlation", "empirical_p_value", "fit_and_estimate",
    "fit_gaussian_conditional", "gaussian_mi_proxy", "gcit_test", "generate",
    "generate_mi_controlled", "ks_independence", "lambda_sweep",
    "mmd_dependence", "pearson", "rdc", "run_plan", "train_null_sampler",
    "tv_lower_bound",
]
