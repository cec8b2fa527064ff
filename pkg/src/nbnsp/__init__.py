"""Noisy bivariate Neyman-Scott point processes: simulation, cross-correlation
model, quasi-maximum-likelihood fitting, and Monte Carlo studies."""

from .errors import DataError, EstimationError, NumericalError
from .estimate import (
    FitResult,
    NelderMeadSettings,
    QmleConfig,
    default_box,
    enumerate_pairs,
    estimate_intensities,
    kernel_ccf,
    qmle_fit,
    quasi_log_likelihood,
)
from .experiments import (
    McReport,
    McScenario,
    parameter_names,
    run_scenario,
    true_amplitude,
)
from .io import (
    RunConfig,
    expand_scenarios,
    load_run_config,
    parse_params,
    parse_run_config,
    read_pattern,
    write_pattern,
)
from .model import (
    ExpKernel,
    GammaKernel,
    NbnspParams,
    ParamBox,
    bilateral_gamma_pdf,
    ccf_window_integral,
    cross_correlation,
    kernel_pdf,
)
from .rng import Rng, child_seed
from .simulate import PointPattern, SimConfig, simulate_nbnsp, simulate_poisson
from .special import kummer_m

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "NumericalError",
    "EstimationError",
    "GammaKernel",
    "ExpKernel",
    "NbnspParams",
    "ParamBox",
    "kernel_pdf",
    "bilateral_gamma_pdf",
    "cross_correlation",
    "ccf_window_integral",
    "kummer_m",
    "Rng",
    "child_seed",
    "SimConfig",
    "PointPattern",
    "simulate_nbnsp",
    "simulate_poisson",
    "QmleConfig",
    "NelderMeadSettings",
    "FitResult",
    "default_box",
    "enumerate_pairs",
    "estimate_intensities",
    "quasi_log_likelihood",
    "qmle_fit",
    "kernel_ccf",
    "McScenario",
    "McReport",
    "run_scenario",
    "true_amplitude",
    "parameter_names",
    "RunConfig",
    "parse_run_config",
    "load_run_config",
    "expand_scenarios",
    "parse_params",
    "read_pattern",
    "write_pattern",
    "__version__",
]
