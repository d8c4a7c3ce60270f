"""Grid-based user browsing model for image search result pages."""

from .baselines import UBM, UbmParameters
from .grid import EventKind, GridLayout, GridPosition, InteractionEvent, Session, build_sequence, transition_distance
from .inference import EmConfig, ParameterStore, em_fit, load_params, log_likelihood, save_params
from .metrics import ndcg, perplexity, perplexity_improvement
from .model import GUBM
from .path import DirectionPolicy, LTOR, RTOL, ZSHAPE, build_path, delinearize, linearize

__all__ = [
    "GUBM", "UBM", "UbmParameters",
    "EventKind", "GridLayout", "GridPosition", "InteractionEvent", "Session", "build_sequence", "transition_distance",
    "EmConfig", "ParameterStore", "em_fit", "load_params", "log_likelihood", "save_params",
    "ndcg", "perplexity", "perplexity_improvement",
    "DirectionPolicy", "LTOR", "RTOL", "ZSHAPE", "build_path", "delinearize", "linearize",
]
__version__ = "0.1.0"
