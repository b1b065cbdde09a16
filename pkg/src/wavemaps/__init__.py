"""Numerical laboratory for k-equivariant wave maps into the two-sphere.

Modules: ``grid`` (radial grids, quadrature, differences), ``statics``
(harmonic maps and fixed auxiliary objects), ``functionals`` (energies and
two-bubble proximity), ``evolve`` (time stepping), ``modulation`` (scale
extraction), ``virial`` (localised virial identity), ``asymptotics``
(interaction integrals and the reduced ODE) and ``cli``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import (AccuracyWarning, ConfigurationError, ConstructionError, DomainError, FitError,
                     NumericalError, ResolutionError, WaveMapError)
from .grid import RadialGrid, geometric_grid, hybrid_grid, quad, uniform_grid
from .statics import LQ, Q, CutoffZ, VirialProfile, bubble, bubble_energy, kappa, two_bubble
from .functionals import FieldPair, bubble_distance, energy, gfun, h_norm, pair_norm
from .evolve import evolve, init_state, two_bubble_state
from .modulation import coercivity_quotient, fit_orthogonal, modulate
from .virial import omega, pairing, virial_residual
from .asymptotics import integrate_ode, interaction_report, rate_fit

__all__ = [
    "__version__", "AccuracyWarning", "ConfigurationError", "ConstructionError", "DomainError", "FitError",
    "NumericalError", "ResolutionError", "WaveMapError", "RadialGrid", "geometric_grid", "hybrid_grid", "quad",
    "uniform_grid", "LQ", "Q", "CutoffZ", "VirialProfile", "bubble", "bubble_energy", "kappa", "two_bubble",
    "FieldPair", "bubble_distance", "energy", "gfun", "h_norm", "pair_norm", "evolve", "init_state",
    "two_bubble_state", "coercivity_quotient", "fit_orthogonal", "modulate", "omega", "pairing",
    "virial_residual", "integrate_ode", "interaction_report", "rate_fit",
]
