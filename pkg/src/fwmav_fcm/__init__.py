"""Fuzzy C-means identification and adaptive fuzzy altitude control of a
four-wing flapping micro air vehicle."""

from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .control import (
    AdaptiveFuzzyController,
    PidController,
    ReferenceSignal,
    SimTrace,
    closed_loop_run,
    compute_rmse,
)
from .exceptions import (
    ConfigError,
    DegenerateClusterError,
    DimensionError,
    FwmavError,
    NumericalError,
    RankDeficientWarning,
    SimulationFault,
)
from .fcm import FcmConfig, FcmModel, FuzzyCMeans, fcm_fit
from .plant import (
    IdentifiedPlant,
    SurrogateParams,
    SurrogatePlant,
    angle_of_attack,
    flapping_angle,
    generate_training_data,
)
from .ts import IoDataset, TakagiSugenoRegressor, TsModel, identify_ts_model, infer

__version__ = "0.1.0"

__all__ = [
    "AdaptiveFuzzyController",
    "ConfigError",
    "DegenerateClusterError",
    "DimensionError",
    "ExperimentConfig",
    "FcmConfig",
    "FcmModel",
    "FuzzyCMeans",
    "FwmavError",
    "IdentifiedPlant",
    "IoDataset",
    "NumericalError",
    "PidController",
    "RankDeficientWarning",
    "ReferenceSignal",
    "SimTrace",
    "SimulationFault",
    "SurrogateParams",
    "SurrogatePlant",
    "TakagiSugenoRegressor",
    "TsModel",
    "angle_of_attack",
    "closed_loop_run",
    "compute_rmse",
    "fcm_fit",
    "flapping_angle",
    "generate_training_data",
    "identify_ts_model",
    "infer",
    "load_config",
    "parse_config",
    "serialize_config",
]
