"""Episode simulation and Monte Carlo estimates of drawdown functionals."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import PreconditionError, UnsupportedArgumentError
from ..model import (
    BrownianLevySpec,
    DiffusionSpec,
    DrawdownQuery,
    GenPempSpec,
    PempSpec,
)
from . import _backend, _fallback
from .rng import MASK, PathRng

__all__ = [
    "MCConfig",
    "EpisodeOutcome",
    "MCEstimate",
    "STOP_REASONS",
    "simulate_pemp_episode",
    "simulate_jd_episode",
    "simulate_bm_episode",
    "simulate_diffusion_episode",
    "simulate_outcomes",
    "functional_values",
    "estimate",
    "worker_count",
]

STOP_REASONS = ("drawdown_crossed", "max_exceeded_K", "truncated")


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    seed: int = 0
    dt: float = 1e-3
    chunk_size: int = 4096
    substeps: int = 1  # Brownian base grid is dt / substeps
    workers: Optional[int] = None
    bridge: bool = True  # continuous barrier monitoring between Euler points

    def check(self, a: Optional[float] = None) -> None:
        if self.n_paths < 100:
            raise PreconditionError(f"n_paths must be at least 100 (got {self.n_paths})")
        if not self.dt > 0:
            raise PreconditionError("dt must be positive")
        if a is not None and self.dt > a / 50.0 * (1.0 + 1e-12):
            raise PreconditionError(f"dt = {self.dt} exceeds a/50 = {a / 50.0}")
        if self.chunk_size < 1 or self.substeps < 1:
            raise PreconditionError("chunk_size and substeps must be positive")
        if not 0 <= self.seed <= MASK:
            raise PreconditionError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class EpisodeOutcome:
    stop_reason: str
    tau: float
    M_at_stop: float
    Y_at_stop: float  # drawdown M - X at the stopping time

    def overshoot(self, a: float) -> float:
        """Y - a at a drawdown stop, else nan."""
        return self.Y_at_stop - a if self.stop_reason == "drawdown_crossed" else math.nan

    @classmethod
    def from_tuple(cls, t) -> "EpisodeOutcome":
        code, tau, M, Y = t
        return cls(STOP_REASONS[int(code)], float(tau), float(M), float(Y))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_err: float
    n: int
    seed: int
    meta: dict = field(default_factory=dict, compare=False)


# --- model dispatch ----------------------------------------------------------


def _pemp_args(spec: PempSpec):
    w = np.array([c.weight for c in spec.jump_mix], dtype=float)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    rates = np.array([c.rate for c in spec.jump_mix], dtype=float)
    signs = np.array([c.sign for c in spec.jump_mix], dtype=float)
    return spec.drift_coef, spec.jump_rate, cum, rates, signs


def _euler_args(model):
    """(a0, a1, b0, b1, lam, eta) for the affine jump-diffusion kernel."""
    if isinstance(model, GenPempSpec):
        return 0.0, model.drift_slope, model.volatility, 0.0, model.jump_rate, model.up_jump_rate
    if isinstance(model, BrownianLevySpec):
        return model.drift, 0.0, model.volatility, 0.0, 0.0, 1.0
    if isinstance(model, DiffusionSpec):
        a0, a1, b0, b1 = model.affine
        return a0, a1, b0, b1, 0.0, 1.0
    raise UnsupportedArgumentError(f"no simulator for {type(model).__name__}")


def _run_one(kind, args, seed, path, x0, a, K, t_max, dt=None, substeps=1, bridge=True):
    if kind == "pemp":
        mu, lam, cum, rates, signs = args
        return _fallback.pemp_episode(seed, path, mu, lam, list(cum), list(rates), list(signs),
                                      x0, a, K, t_max)
    return _fallback.euler_episode(seed, path, *args, dt, substeps, x0, a, K, t_max, int(bridge))


def simulate_pemp_episode(spec: PempSpec, x0: float, a: float, K: float, rng: PathRng,
                          t_max: float = math.inf) -> EpisodeOutcome:
    """One exact episode; no time discretization is involved."""
    return EpisodeOutcome.from_tuple(_run_one("pemp", _pemp_args(spec), rng.seed, rng.path, x0, a, K, t_max))


def simulate_jd_episode(spec: GenPempSpec, x0: float, a: float, K: float, dt: float, rng: PathRng,
                        substeps: int = 1, t_max: float = math.inf, bridge: bool = True) -> EpisodeOutcome:
    return EpisodeOutcome.from_tuple(
        _run_one("euler", _euler_args(spec), rng.seed, rng.path, x0, a, K, t_max, dt, substeps, bridge)
    )


def simulate_bm_episode(spec: BrownianLevySpec, x0: float, a: float, K: float, dt: float, rng: PathRng,
                        substeps: int = 1, t_max: float = math.inf, bridge: bool = True) -> EpisodeOutcome:
    return EpisodeOutcome.from_tuple(
        _run_one("euler", _euler_args(spec), rng.seed, rng.path, x0, a, K, t_max, dt, substeps, bridge)
    )


def simulate_diffusion_episode(spec: DiffusionSpec, x0: float, a: float, K: float, dt: float,
                               rng: PathRng, substeps: int = 1, t_max: float = math.inf, bridge: bool = True) -> EpisodeOutcome:
    return EpisodeOutcome.from_tuple(
        _run_one("euler", _euler_args(spec), rng.seed, rng.path, x0, a, K, t_max, dt, substeps, bridge)
    )


# --- batched estimation ------------------------------------------------------


def worker_count(requested: Optional[int] = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("DDLAB_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _horizon(query: DrawdownQuery, functional: str) -> tuple[float, float]:
    """Effective cap on M and time horizon.

    For the Laplace functional with K = inf, paths whose maximum passes
    x0 + 40/delta (or whose clock passes 37/q) are cut; their contribution
    is below exp(-37) relative to the retained mass.
    """
    K, t_max = query.K, math.inf
    if functional == "laplace":
        if not math.isfinite(K) and query.delta > 0:
            K = query.x0 + 40.0 / query.delta
        if query.q > 0:
            t_max = 37.0 / query.q
    return K, t_max


def simulate_outcomes(model, query: DrawdownQuery, mc: MCConfig, functional: str = "indicator",
                      backend: Optional[str] = None) -> dict[str, np.ndarray]:
    """Simulate ``mc.n_paths`` episodes; arrays are in global path order."""
    name, kern = _backend.load(backend) if backend else (_backend.BACKEND, _backend.kernels)
    K_eff, t_max = _horizon(query, functional)
    n = mc.n_paths
    code = np.empty(n, dtype=np.int8)
    tau = np.empty(n)
    M = np.empty(n)
    Y = np.empty(n)
    if isinstance(model, PempSpec):
        mu, lam, cum, rates, signs = _pemp_args(model)

        def run(lo, hi):
            kern.pemp_batch(mc.seed, lo, hi - lo, mu, lam, cum, rates, signs, query.x0, query.a, K_eff,
                            t_max, code[lo:hi], tau[lo:hi], M[lo:hi], Y[lo:hi])
    else:
        a0, a1, b0, b1, lam, eta = _euler_args(model)
        mc.check(query.a)

        def run(lo, hi):
            kern.euler_batch(mc.seed, lo, hi - lo, a0, a1, b0, b1, lam, eta, mc.dt, mc.substeps,
                             query.x0, query.a, K_eff, t_max, int(mc.bridge), code[lo:hi], tau[lo:hi], M[lo:hi], Y[lo:hi])

    chunks = [(lo, min(n, lo + mc.chunk_size)) for lo in range(0, n, mc.chunk_size)]
    workers = min(worker_count(mc.workers), len(chunks))
    if workers <= 1:
        for lo, hi in chunks:
            run(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda c: run(*c), chunks))
    return {"code": code, "tau": tau, "M": M, "Y": Y, "backend": name, "K_eff": K_eff, "t_max": t_max}


def functional_values(out: dict, query: DrawdownQuery, functional: str) -> np.ndarray:
    hit = (out["code"] == 0) & (out["M"] <= query.K)
    if functional == "indicator":
        return hit.astype(float)
    if functional == "laplace":
        expo = -query.q * out["tau"] - query.s * (out["Y"] - query.a) - query.delta * out["M"]
        return np.where(hit, np.exp(np.where(hit, expo, 0.0)), 0.0)
    raise UnsupportedArgumentError(f"unknown functional {functional!r}")


def estimate(model, query: DrawdownQuery, mc: MCConfig, functional: str = "indicator",
             backend: Optional[str] = None) -> MCEstimate:
    """Mean and standard error of the functional over independent episodes.

    ``indicator`` estimates P_x0{tau_a < inf, M <= K}; ``laplace`` estimates
    E_x0[exp(-q tau - s (Y - a) - delta M); M <= K].
    """
    mc.check(None if isinstance(model, PempSpec) else query.a)
    if isinstance(model, PempSpec) and query.x0 < query.a:
        raise PreconditionError("PEMP episodes need x0 >= a")
    out = simulate_outcomes(model, query, mc, functional, backend)
    vals = functional_values(out, query, functional)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    meta = {"backend": out["backend"], "functional": functional}
    if not isinstance(model, PempSpec):
        meta["dt"] = mc.dt
        meta["monitor"] = "bridge" if mc.bridge else "grid"
    return MCEstimate(mean, se, len(vals), mc.seed, meta)
