"""Online debiased lasso: streaming inference for high-dimensional linear models."""
from .checkpoint import load_checkpoint, save_checkpoint
from .debias import InferenceResult, confidence_interval, norm_quantile
from .engine import EngineConfig, OnlineDebiasedLasso
from .errors import CheckpointError, CheckpointVersionError, DataError, NumericalError, ODLError
from .prox import SolverConfig, solve_l1
from .simulate import SimDesign, run_replications
from .suffstats import BatchData, CumulativeStats

__all__ = [
    "BatchData", "CheckpointError", "CheckpointVersionError", "CumulativeStats", "DataError",
    "EngineConfig", "InferenceResult", "NumericalError", "ODLError", "OnlineDebiasedLasso",
    "SimDesign", "SolverConfig", "confidence_interval", "load_checkpoint", "norm_quantile",
    "run_replications", "save_checkpoint", "solve_l1",
]

__version__ = "0.1.0"
