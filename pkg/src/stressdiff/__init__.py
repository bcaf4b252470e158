"""Pseudo-spectral simulation and verification tools for a compressible
viscoelastic rate-type fluid with stress diffusion on the periodic box [-1, 1]^dim.
"""

from .constitutive import Parameters, equilibrium_b
from .diagnostics import (EnergyLedger, NormTracker, energy_balance_residuals, energy_ledger,
                          evf_identity, renormalized_residual, rho_b_pair_residual)
from .errors import (DegenerateDensity, NaNDetected, NegativeDensity, NonPositiveB, NonZeroMean,
                     ParseError, PositivityWarning, StepFailure, StressDiffError, ValidationError,
                     WindowTooShort)
from .grid import GridSpec
from .solver import RunResult, SolverOptions, StepReport, advance, run
from .state import State, seeded_random, trig_perturbation, uniform_state

__version__ = "0.1.0"
