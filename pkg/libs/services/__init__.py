"""Pipeline stage services shared by the command-line interface."""

from .baseline_service import BaselineService
from .evaluation_service import EvaluationService
from .feature_service import FeatureService
from .generation_service import GenerationService
from .preparation_service import PreparationService, PreparedRegion
from .synth_service import SynthService

__all__ = [
    "BaselineService",
    "EvaluationService",
    "FeatureService",
    "GenerationService",
    "PreparationService",
    "PreparedRegion",
    "SynthService",
]
