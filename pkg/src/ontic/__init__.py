"""Ontological models of quantum systems: simulation and support analysis."""

from .models import MODEL_NAMES, get_model
from .ontology import Integrator, predict

__all__ = ["MODEL_NAMES", "Integrator", "get_model", "predict"]
__version__ = "0.1.0"
