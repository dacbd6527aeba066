"""Nonautonomous Nicholson blowflies model: simulation and stability criteria.

A library plus CLI for a delayed population model with several pairs of
time-varying delays. It integrates trajectories by the method of steps,
evaluates extinction / permanence / local stability / global attractivity
criteria mechanically, and analyzes the associated scalar feedback map.
"""

from ._backend import BACKEND, has_compiled
from .errors import (
    ExprDomainError,
    ExprError,
    ExprSyntaxError,
    MapUndefined,
    NoPositiveEquilibrium,
    PositivityLoss,
    ScenarioError,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "has_compiled",
    "ExprDomainError",
    "ExprError",
    "ExprSyntaxError",
    "MapUndefined",
    "NoPositiveEquilibrium",
    "PositivityLoss",
    "ScenarioError",
    "__version__",
]
