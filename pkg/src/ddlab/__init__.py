"""Drawdown first-passage laws from local drawdown rates.

Rates come from closed-form scale functions (spectrally negative Levy,
refracted Levy, linear diffusions) or from residue-kernel exit matrices
(piecewise exponential Markov process, jump diffusion). Solvers turn rates
into h(x) = E_x[exp(-q tau_a - s (Y - a)); tau_a < inf, M <= K], and a Monte
Carlo oracle checks the results.
"""

from .errors import DdlabError
from .model import (
    BrownianLevySpec,
    CramerLundbergSpec,
    DiffusionSpec,
    DrawdownQuery,
    GenPempSpec,
    JumpComponent,
    PempSpec,
    RefractedSpec,
    validate,
)
from .ratefield import RateField, constant_rates
from .solver import (
    HCurve,
    SolverConfig,
    check_rate_inequality,
    levy_joint_lt,
    solve,
    solve_backward,
    solve_picard,
    solve_spectrally_negative,
)

__version__ = "0.1.0"

__all__ = [
    "BrownianLevySpec",
    "CramerLundbergSpec",
    "DdlabError",
    "DiffusionSpec",
    "DrawdownQuery",
    "GenPempSpec",
    "HCurve",
    "JumpComponent",
    "PempSpec",
    "RateField",
    "RefractedSpec",
    "SolverConfig",
    "check_rate_inequality",
    "constant_rates",
    "levy_joint_lt",
    "solve",
    "solve_backward",
    "solve_picard",
    "solve_spectrally_negative",
    "validate",
]
