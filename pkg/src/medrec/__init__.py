"""Drug-interaction-aware medication suggestion toolkit."""

from .autodiff import Adam, Mlp, Tape, grad_check
from .data import Cohort, DdiEdge, DdiGraph, Drug, load_cohort, load_ddi_graph
from .errors import (
    ConfigError,
    DisconnectedQueryError,
    DivergenceError,
    IngestionError,
    MedrecError,
    SamplingError,
    ShapeError,
)

__version__ = "1.0.0"

__all__ = [
    "Adam",
    "Mlp",
    "Tape",
    "grad_check",
    "Cohort",
    "DdiEdge",
    "DdiGraph",
    "Drug",
    "load_cohort",
    "load_ddi_graph",
    "MedrecError",
    "ConfigError",
    "DisconnectedQueryError",
    "DivergenceError",
    "IngestionError",
    "SamplingError",
    "ShapeError",
    "__version__",
]
