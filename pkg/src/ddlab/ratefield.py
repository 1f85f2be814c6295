"""Local drawdown rates consumed by the solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonFiniteRateError

__all__ = ["RateField", "constant_rates"]


def _const(value: float) -> Callable:
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, value, dtype=float) if x.ndim else float(value)

    return f


@dataclass(frozen=True)
class RateField:
    """The triple (b1, b2, c) of local drawdown rates.

    The upward-jump rate measure is

        b2(x, dz) = b2_amp(x) * sum_j w_j eta_j exp(-eta_j z) dz + atom0 * delta_0(dz),

    i.e. an amplitude times a normalized exponential mixture, plus an optional
    constant atom at zero. ``c_fn(x, s)`` takes the overshoot argument
    explicitly; ``s`` is the value used when the field is handed to a solver.
    All callables accept scalars or numpy arrays.
    """

    b1_fn: Callable
    c_fn: Callable
    b2_amp_fn: Callable = field(default_factory=lambda: _const(0.0))
    kernel_rates: tuple[float, ...] = (1.0,)
    kernel_weights: tuple[float, ...] = (1.0,)
    atom0: float = 0.0
    valid_domain: tuple[float, float] = (-math.inf, math.inf)
    q: float = 0.0
    s: float = 0.0
    a: float = 1.0
    tag: str = ""
    spectrally_negative: bool = False

    def _check_domain(self, x) -> None:
        lo, hi = self.valid_domain
        xa = np.asarray(x, dtype=float)
        if xa.size and (np.any(xa <= lo) or np.any(xa > hi)):
            raise DomainError(f"x outside valid domain ({lo}, {hi}] for {self.tag or 'rates'}")

    def b1(self, x):
        self._check_domain(x)
        return self.b1_fn(x)

    def b2_amp(self, x):
        self._check_domain(x)
        if self.spectrally_negative:
            return _const(0.0)(x)
        return self.b2_amp_fn(x)

    def c(self, x, s: Optional[float] = None):
        self._check_domain(x)
        return self.c_fn(x, self.s if s is None else s)

    def evaluate(self, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized (b1, b2_amp, c) at ``xs``; raises if anything is not finite."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        b1 = np.broadcast_to(np.asarray(self.b1(xs), dtype=float), xs.shape).copy()
        b2 = np.broadcast_to(np.asarray(self.b2_amp(xs), dtype=float), xs.shape).copy()
        c = np.broadcast_to(np.asarray(self.c(xs), dtype=float), xs.shape).copy()
        for name, arr in (("b1", b1), ("b2_amp", b2), ("c", c)):
            bad = ~np.isfinite(arr)
            if bad.any():
                raise NonFiniteRateError(f"{name} not finite at x={xs[bad][0]!r}")
        return b1, b2, c

    def b2_laplace(self, delta: float) -> float:
        """Laplace transform of the normalized jump density at ``delta``."""
        return float(sum(w * eta / (eta + delta) for w, eta in zip(self.kernel_weights, self.kernel_rates)))

    def with_c_scaled(self, factor: float) -> "RateField":
        base = self.c_fn
        return _replace(self, c_fn=lambda x, s: factor * base(x, s))

    def with_s(self, s: float) -> "RateField":
        return _replace(self, s=s)


def _replace(rf: RateField, **changes) -> RateField:
    import dataclasses

    return dataclasses.replace(rf, **changes)


def constant_rates(b1: float, c: float, b2_amp: float = 0.0, kernel_rate: float = 1.0,
                   a: float = 1.0, tag: str = "constant") -> RateField:
    """Spatially constant rates, as produced by any Levy model."""
    return RateField(
        b1_fn=_const(b1),
        c_fn=lambda x, s: _const(c)(x),
        b2_amp_fn=_const(b2_amp),
        kernel_rates=(kernel_rate,),
        kernel_weights=(1.0,),
        a=a,
        tag=tag,
        spectrally_negative=(b2_amp == 0.0),
    )
