"""Pseudo-spectral simulator for viscoelastic phase separation with relative-energy diagnostics."""
from .coeffs import CoefficientSet, PotentialSpec, ScalarFunction, validate_assumptions
from .dynamics import ModelParams
from .grid import Grid
from .state import Perturbation, State, make_initial
from .timestep import SchemeConfig, run

__version__ = "0.1.0"

__all__ = ["CoefficientSet", "Grid", "ModelParams", "Perturbation", "PotentialSpec",
           "ScalarFunction", "SchemeConfig", "State", "make_initial", "run",
           "validate_assumptions", "__version__"]
