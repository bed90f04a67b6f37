"""Variational ground states built from Gaussian rotations of local quartet states."""

from .energy import VariationalPoint, energy_and_gradients, expectation
from .majorana import ModeLayout, QuadraticTensor, QuarticTensor
from .models import ConfigurationError, FermionModel, HubbardParams, build_h4, build_hubbard
from .optimize import NumericalAbort, OptimizerConfig, minimize, minimize_gaussian
from .pairing import pairing

__all__ = [
    "ConfigurationError",
    "FermionModel",
    "HubbardParams",
    "ModeLayout",
    "NumericalAbort",
    "OptimizerConfig",
    "QuadraticTensor",
    "QuarticTensor",
    "VariationalPoint",
    "build_h4",
    "build_hubbard",
    "energy_and_gradients",
    "expectation",
    "minimize",
    "minimize_gaussian",
    "pairing",
]
