"""
Giant atoms on a coupled-resonator waveguide.

Modules
-------
model       geometry and parameter types, reference configurations
kernels     Bessel functions and the memory-kernel integrals
markovian   Markovian master equation, Liouvillian and its gap
memory      time-local memory matrix, eigenvalue branches, amplitude ODE
lattice     exact single-excitation dynamics and bound states
analysis    long-time predictions and trajectory metrics
acceptance  end-to-end checks on the reference configurations
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Boundary,
    ConfigError,
    GiantAtom,
    Setup,
    WaveguideParams,
    named_scenario,
    scenario,
    validate,
)

__all__ = [
    "__version__",
    "Boundary",
    "ConfigError",
    "GiantAtom",
    "Setup",
    "WaveguideParams",
    "named_scenario",
    "scenario",
    "validate",
]
