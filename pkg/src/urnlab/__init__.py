"""Feedback interacting urn models: exact limits, simulation and flip regions."""

__version__ = "0.1.0"

from .errors import UrnError  # noqa: E402
from .model import UrnModel, flip_predicate, make_model, theoretical_limits, validate_model  # noqa: E402

__all__ = ["UrnError", "UrnModel", "flip_predicate", "make_model", "theoretical_limits", "validate_model"]
