"""Stochastic Petri net analysis by exact CTMC solution, simulation,
fluid ODEs and a boundary-aware jump-diffusion approximation."""
import os as _os

# the bundled TBB is too old for numba and only produces a warning
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from .core import (  # noqa: E402
    DisabledTransition,
    ModelError,
    ScalingFamily,
    SpnModel,
    enabling_degree,
    fire,
    instantiate,
    state_rate,
    transition_intensity,
    validate_model,
)
from .ensemble import Ensemble  # noqa: E402

__all__ = [
    "DisabledTransition",
    "Ensemble",
    "ModelError",
    "ScalingFamily",
    "SpnModel",
    "enabling_degree",
    "fire",
    "instantiate",
    "state_rate",
    "transition_intensity",
    "validate_model",
]
__version__ = "0.1.0"
