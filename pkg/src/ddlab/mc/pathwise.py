"""Path-by-path check of the exit-time orderings that bracket the drawdown law.

For a path started at x with M_0 = x, 0 < eps < a, and finite q, s >= 0:

  1{T+ < T-(x+eps-a)} <= 1{T+ < tau_a} <= 1{T+ < T-(x-a)}
  e^{-q tau - s(Y - a)} 1{tau < T+} >= e^{-q T2 - s(x - a - X_T2) - s eps} 1{T2 < T+}
  e^{-q tau - s(Y - a)} 1{tau < T+} <= e^{-q T1 - s(x - a - X_T1)} 1{T1 < T+}

with T+ the first passage above x + eps, T1 below x + eps - a and T2 below x - a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import PreconditionError, UnsupportedArgumentError
from ..model import PempSpec
from .rng import STREAM_EVENTS, exponential, stream_key, uniform

__all__ = ["PathInequalityReport", "check_path_inequalities", "pemp_exit_record"]

_TOL = 1e-12


@dataclass
class PathInequalityReport:
    n_paths: int
    eps: float
    violations: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.violations.values())

    @property
    def ok(self) -> bool:
        return self.total == 0


@dataclass(frozen=True)
class _ExitRecord:
    t_up: float
    tau: float
    Y: float
    t1: float
    x1: float
    t2: float
    x2: float


def pemp_exit_record(spec: PempSpec, x: float, eps: float, a: float, seed: int, path: int) -> _ExitRecord:
    """Simulate exactly until the first of T+ and T2, recording every passage on the way."""
    mu, lam = spec.drift_coef, spec.jump_rate
    comps = spec.jump_mix
    cum = []
    acc = 0.0
    for c in comps:
        acc += c.weight
        cum.append(acc)
    cum[-1] = 1.0
    up, lo1, lo2 = x + eps, x + eps - a, x - a
    key = stream_key(seed, path, STREAM_EVENTS)
    n = 0
    X = M = x
    t = 0.0
    tau = t1 = t2 = math.inf
    Y = x1 = x2 = math.nan
    while True:
        E = exponential(uniform(key, n), lam)
        n += 1
        t_cross = math.log(up / X) / mu if X > 0 else math.inf
        if t_cross <= E:
            return _ExitRecord(t + t_cross, tau, Y, t1, x1, t2, x2)
        t += E
        X *= math.exp(mu * E)
        M = max(M, X)
        u = uniform(key, n)
        n += 1
        j = 0
        while j < len(cum) - 1 and u >= cum[j]:
            j += 1
        X += comps[j].sign * exponential(uniform(key, n), comps[j].rate)
        n += 1
        if X >= up:
            return _ExitRecord(t, tau, Y, t1, x1, t2, x2)
        M = max(M, X)
        if math.isinf(tau) and M - X > a:
            tau, Y = t, M - X
        if math.isinf(t1) and X < lo1:
            t1, x1 = t, X
        if X < lo2:
            t2, x2 = t, X
            return _ExitRecord(math.inf, tau, Y, t1, x1, t2, x2)


def check_path_inequalities(model, x: float, eps: float, a: float, n: int, seed: int = 0,
                            q: float = 0.3, s: float = 0.5, reverse: bool = False) -> PathInequalityReport:
    """Count per-path violations of the five orderings; ``reverse`` flips each one."""
    if not isinstance(model, PempSpec):
        raise UnsupportedArgumentError("pathwise checks need an exactly simulable model (PEMP)")
    if not 0 < eps < a:
        raise PreconditionError("eps must lie in (0, a)")
    if x < a:
        raise PreconditionError("PEMP paths need x >= a")
    names = ("up_lower", "up_upper", "down_lower", "down_upper", "drawdown_before_T2")
    rep = PathInequalityReport(n, eps, {k: 0 for k in names})

    def leq(lhs, rhs):
        return (lhs <= rhs + _TOL) if not reverse else (rhs <= lhs + _TOL)

    for p in range(n):
        r = pemp_exit_record(model, x, eps, a, seed, p)
        i_lo = float(r.t_up < r.t1)
        i_mid = float(r.t_up < r.tau)
        i_hi = float(r.t_up < r.t2)
        mid = math.exp(-q * r.tau - s * (r.Y - a)) if r.tau < r.t_up else 0.0
        low = math.exp(-q * r.t2 - s * (x - a - r.x2) - s * eps) if r.t2 < r.t_up else 0.0
        high = math.exp(-q * r.t1 - s * (x - a - r.x1)) if r.t1 < r.t_up else 0.0
        checks = {
            "up_lower": leq(i_lo, i_mid),
            "up_upper": leq(i_mid, i_hi),
            "down_lower": leq(low, mid),
            "down_upper": leq(mid, high),
            "drawdown_before_T2": leq(r.tau, r.t2),
        }
        for k, ok in checks.items():
            if not ok:
                rep.violations[k] += 1
    return rep
