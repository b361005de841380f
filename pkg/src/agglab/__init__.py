"""Simulation and exact-solution laboratory for kinetic coalescence with mass and impulsion."""

__version__ = "0.1.0"

from .errors import (AggLabError, ConfigError, ConvergenceError, DimensionMismatch,
                     DomainError, MajorantViolation, NoMajorantError)
from .kernels import (Constant, HardSphere, ImpulsionPower, KernelSpec, Manev, MassOnly,
                      ParticleState, coalesce, eval_kernel, kinetic_energy_loss, majorant)

__all__ = [
    "__version__", "AggLabError", "ConfigError", "ConvergenceError", "DimensionMismatch",
    "DomainError", "MajorantViolation", "NoMajorantError", "Constant", "HardSphere",
    "ImpulsionPower", "KernelSpec", "Manev", "MassOnly", "ParticleState", "coalesce",
    "eval_kernel", "kinetic_energy_loss", "majorant",
]
