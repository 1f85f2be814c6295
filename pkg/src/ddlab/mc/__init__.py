"""Monte Carlo oracle for drawdown episodes."""

from ._backend import BACKEND
from .oracle import (
    EpisodeOutcome,
    MCConfig,
    MCEstimate,
    estimate,
    simulate_bm_episode,
    simulate_diffusion_episode,
    simulate_jd_episode,
    simulate_outcomes,
    simulate_pemp_episode,
)
from .pathwise import PathInequalityReport, check_path_inequalities
from .rng import PathRng

__all__ = [
    "BACKEND",
    "EpisodeOutcome",
    "MCConfig",
    "MCEstimate",
    "PathInequalityReport",
    "PathRng",
    "check_path_inequalities",
    "estimate",
    "simulate_bm_episode",
    "simulate_diffusion_episode",
    "simulate_jd_episode",
    "simulate_outcomes",
    "simulate_pemp_episode",
]
