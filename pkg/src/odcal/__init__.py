"""Opinion-dynamics calibration against oscillating concern series.

Simulates three opinion-fusion models (stubborn averaging, bounded
confidence, bounded confidence with repulsion) on a scale-free network
with per-period parameters, and fits those parameters to an observed
concern time series with population-based optimizers over a
Monte-Carlo-averaged MAPE objective.
"""

from .calibrate import (CalibrationProblem, CalibrationResult, bounds_for_model,
                        decode, encode, load_params, run_calibration, save_result)
from .dynamics import (ATBCRParams, DWParams, FJParams, MODELS, MODEL_ATBCR,
                       MODEL_DW, MODEL_FJ, ParameterSchedule, atbcr_step,
                       concern_proportion, dw_step, fj_step, simulate_horizon,
                       simulate_period)
from .errors import ConfigError, ParseError
from .evolve import (Bounds, ConvergenceLog, OptimizerConfig, repair, run_de,
                     run_lshade, run_pso, run_shade)
from .fitness import FitnessValue, evaluate, mape
from .graph import (SocialNetwork, from_edges, generate_ba, load_edgelist,
                    random_edge, save_edgelist)
from .survey import (SurveyDataset, TargetSeries, initialize_opinions,
                     parse_survey, parse_targets, synth_dataset)

__version__ = "0.1.0"

__all__ = [
    "ATBCRParams", "Bounds", "CalibrationProblem", "CalibrationResult",
    "ConfigError", "ConvergenceLog", "DWParams", "FJParams", "FitnessValue",
    "MODELS", "MODEL_ATBCR", "MODEL_DW", "MODEL_FJ", "OptimizerConfig",
    "ParameterSchedule", "ParseError", "SocialNetwork", "SurveyDataset",
    "TargetSeries", "atbcr_step", "bounds_for_model", "concern_proportion",
    "decode", "dw_step", "encode", "evaluate", "fj_step", "from_edges",
    "generate_ba", "initialize_opinions", "load_edgelist", "load_params", "mape",
    "parse_survey", "parse_targets", "random_edge", "repair", "run_calibration",
    "run_de", "run_lshade", "run_pso", "run_shade", "save_edgelist",
    "save_result", "simulate_horizon", "simulate_period", "synth_dataset",
]
