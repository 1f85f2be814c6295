"""Process specifications and drawdown queries.

Every spec is an immutable dataclass. Construction never raises on bad
parameter values; :func:`validate` collects the violated constraints so that
the CLI can report all of them at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "BrownianLevySpec",
    "CramerLundbergSpec",
    "JumpComponent",
    "PempSpec",
    "GenPempSpec",
    "DiffusionSpec",
    "RefractedSpec",
    "DrawdownQuery",
    "ModelSpec",
    "Violation",
    "ValidationReport",
    "validate",
    "pemp_reference",
    "jd_reference",
]


@dataclass(frozen=True)
class BrownianLevySpec:
    """X_t = drift * t + volatility * B_t."""

    drift: float
    volatility: float

    tag = "bm"

    def laplace_exponent(self, s):
        return self.drift * s + 0.5 * self.volatility**2 * s * s

    def tilted(self, s: float) -> "BrownianLevySpec":
        """Law of X under the exponential change of measure with parameter s."""
        return BrownianLevySpec(self.drift + s * self.volatility**2, self.volatility)

    def with_drift_reduced(self, rate: float) -> "BrownianLevySpec":
        return BrownianLevySpec(self.drift - rate, self.volatility)


@dataclass(frozen=True)
class CramerLundbergSpec:
    """Premium-rate drift minus compound Poisson exponential claims."""

    premium: float
    claim_rate: float
    claim_mean: float

    tag = "cl"

    @property
    def claim_decay(self) -> float:
        return 1.0 / self.claim_mean

    @property
    def net_profit(self) -> bool:
        return self.premium > self.claim_rate * self.claim_mean

    def laplace_exponent(self, s):
        eta = self.claim_decay
        return self.premium * s - self.claim_rate * s / (eta + s)

    def tilted(self, s: float) -> "CramerLundbergSpec":
        eta = self.claim_decay
        return CramerLundbergSpec(
            self.premium, self.claim_rate * eta / (eta + s), 1.0 / (eta + s)
        )

    def with_drift_reduced(self, rate: float) -> "CramerLundbergSpec":
        return CramerLundbergSpec(self.premium - rate, self.claim_rate, self.claim_mean)


@dataclass(frozen=True)
class JumpComponent:
    weight: float
    rate: float
    direction: str  # "up" or "down"

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "up" else -1.0


@dataclass(frozen=True)
class PempSpec:
    """Piecewise exponential Markov process dX = mu X dt + dZ.

    Jump sizes are a finite mixture of signed exponentials.
    """

    drift_coef: float = 1.0
    jump_rate: float = 3.0
    jump_mix: tuple[JumpComponent, ...] = (
        JumpComponent(1.0 / 3.0, 1.0, "up"),
        JumpComponent(1.0 / 3.0, 1.0, "down"),
        JumpComponent(1.0 / 3.0, 2.0, "down"),
    )

    tag = "pemp"

    def jump_density(self, w):
        """Density of a single jump size at ``w``."""
        w = np.asarray(w, dtype=float)
        out = np.zeros_like(w)
        for comp in self.jump_mix:
            side = w > 0 if comp.direction == "up" else w < 0
            out = out + np.where(side, comp.weight * comp.rate * np.exp(-comp.rate * np.abs(w)), 0.0)
        return out

    def is_reference_instance(self) -> bool:
        ref = PempSpec()
        if not (math.isclose(self.drift_coef, 1.0) and math.isclose(self.jump_rate, 3.0)):
            return False
        mine = sorted((c.direction, c.rate, c.weight) for c in self.jump_mix)
        theirs = sorted((c.direction, c.rate, c.weight) for c in ref.jump_mix)
        return len(mine) == len(theirs) and all(
            a[0] == b[0] and math.isclose(a[1], b[1]) and math.isclose(a[2], b[2], rel_tol=1e-12)
            for a, b in zip(mine, theirs)
        )


@dataclass(frozen=True)
class GenPempSpec:
    """dX = slope X dt + volatility dW + dZ with exponential upward jumps."""

    drift_slope: float = 1.0
    volatility: float = math.sqrt(2.0)
    jump_rate: float = 1.0
    up_jump_rate: float = 1.0

    tag = "jd"

    def is_reference_instance(self) -> bool:
        return (
            math.isclose(self.drift_slope, 1.0)
            and math.isclose(self.volatility, math.sqrt(2.0))
            and math.isclose(self.jump_rate, 1.0)
            and math.isclose(self.up_jump_rate, 1.0)
        )


_DIFFUSION_FAMILIES = ("constant", "ou", "gbm")


@dataclass(frozen=True)
class DiffusionSpec:
    """Linear diffusion dX = mu(X) dt + sigma(X) dW from a named family.

    Families and parameters:

    ``constant``  mu(x) = mu, sigma(x) = sigma
    ``ou``        mu(x) = -kappa (x - theta), sigma(x) = sigma
    ``gbm``       mu(x) = mu x, sigma(x) = sigma x, state space (0, inf)

    All three drift/volatility pairs are affine in x, which the Euler kernels
    rely on.
    """

    family: str
    params: dict = field(default_factory=dict)

    tag = "diffusion"

    @classmethod
    def constant(cls, mu: float = 0.0, sigma: float = 1.0) -> "DiffusionSpec":
        return cls("constant", {"mu": mu, "sigma": sigma})

    @classmethod
    def ou(cls, kappa: float = 1.0, sigma: float = 1.0, theta: float = 0.0) -> "DiffusionSpec":
        return cls("ou", {"kappa": kappa, "sigma": sigma, "theta": theta})

    @classmethod
    def gbm(cls, mu: float = 0.0, sigma: float = 1.0) -> "DiffusionSpec":
        return cls("gbm", {"mu": mu, "sigma": sigma})

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    @property
    def affine(self) -> tuple[float, float, float, float]:
        """(a0, a1, b0, b1) with mu(x) = a0 + a1 x and sigma(x) = b0 + b1 x."""
        p = self.params
        if self.family == "constant":
            return (p["mu"], 0.0, p["sigma"], 0.0)
        if self.family == "ou":
            return (p["kappa"] * p.get("theta", 0.0), -p["kappa"], p["sigma"], 0.0)
        if self.family == "gbm":
            return (0.0, p["mu"], 0.0, p["sigma"])
        raise KeyError(self.family)

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, math.inf) if self.family == "gbm" else (-math.inf, math.inf)

    @property
    def drift_fn(self) -> Callable:
        a0, a1, _, _ = self.affine
        return lambda x: a0 + a1 * np.asarray(x, dtype=float)

    @property
    def vol_fn(self) -> Callable:
        _, _, b0, b1 = self.affine
        return lambda x: b0 + b1 * np.asarray(x, dtype=float)

    def drift_ratio_integral(self, lo, hi):
        """Closed form of the integral of 2 mu / sigma^2 over [lo, hi]."""
        p = self.params
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.family == "constant":
            return 2.0 * p["mu"] / p["sigma"] ** 2 * (hi - lo)
        if self.family == "ou":
            th = p.get("theta", 0.0)
            return -p["kappa"] / p["sigma"] ** 2 * ((hi - th) ** 2 - (lo - th) ** 2)
        if self.family == "gbm":
            return 2.0 * p["mu"] / p["sigma"] ** 2 * np.log(hi / lo)
        raise KeyError(self.family)


@dataclass(frozen=True)
class RefractedSpec:
    """X_t = U_t - refraction * Leb{s <= t : X_s > threshold}."""

    base: Union[BrownianLevySpec, CramerLundbergSpec]
    refraction: float
    threshold: float

    tag = "refracted"


ModelSpec = Union[
    BrownianLevySpec, CramerLundbergSpec, PempSpec, GenPempSpec, DiffusionSpec, RefractedSpec
]


@dataclass(frozen=True)
class DrawdownQuery:
    """Arguments of h(x) = E_x[exp(-q tau - s (Y_tau - a) - delta M_tau); M_tau <= K]."""

    q: float = 0.0
    s: float = 0.0
    delta: float = 0.0
    a: float = 1.0
    K: float = math.inf
    x0: float = 0.0


def pemp_reference() -> PempSpec:
    """mu = 1, lambda = 3, jumps Exp(1) up / Exp(1) down / Exp(2) down, equal weights."""
    return PempSpec()


def jd_reference() -> GenPempSpec:
    return GenPempSpec()


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, constraint: str, message: str) -> None:
        self.violations.append(Violation(constraint, message))

    def names(self) -> list[str]:
        return [v.constraint for v in self.violations]

    def raise_if_failed(self) -> None:
        from .errors import ValidationError

        if self.violations:
            raise ValidationError(self.violations)


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def _validate_levy(spec, rep: ValidationReport) -> None:
    if isinstance(spec, BrownianLevySpec):
        if not _finite(spec.drift):
            rep.add("drift finite", f"drift={spec.drift}")
        if not (spec.volatility > 0):
            rep.add("volatility > 0", f"volatility={spec.volatility}")
    elif isinstance(spec, CramerLundbergSpec):
        for name in ("premium", "claim_rate", "claim_mean"):
            val = getattr(spec, name)
            if not (val > 0):
                rep.add(f"{name} > 0", f"{name}={val}")


def validate(spec: ModelSpec, query: DrawdownQuery | None = None) -> ValidationReport:
    """Check the standing assumptions for ``spec`` (and ``query`` if given)."""
    rep = ValidationReport()
    if isinstance(spec, (BrownianLevySpec, CramerLundbergSpec)):
        _validate_levy(spec, rep)
    elif isinstance(spec, PempSpec):
        if not (spec.drift_coef > 0):
            rep.add("drift_coef > 0", f"drift_coef={spec.drift_coef}")
        if not (spec.jump_rate > 0):
            rep.add("jump_rate > 0", f"jump_rate={spec.jump_rate}")
        if not spec.jump_mix:
            rep.add("jump_mix nonempty", "no jump components")
        total = sum(c.weight for c in spec.jump_mix)
        if abs(total - 1.0) > 1e-12:
            rep.add("weights sum to 1", f"sum={total!r}")
        for i, c in enumerate(spec.jump_mix):
            if not (0 <= c.weight <= 1):
                rep.add("weight in [0,1]", f"component {i}: weight={c.weight}")
            if not (c.rate > 0):
                rep.add("rate > 0", f"component {i}: rate={c.rate}")
            if c.direction not in ("up", "down"):
                rep.add("direction in {up,down}", f"component {i}: {c.direction!r}")
    elif isinstance(spec, GenPempSpec):
        if not (spec.volatility > 0):
            rep.add("volatility > 0", f"volatility={spec.volatility}")
        if not (spec.jump_rate >= 0):
            rep.add("jump_rate ≥ 0", f"jump_rate={spec.jump_rate}")
        if not (spec.up_jump_rate > 0):
            rep.add("up_jump_rate > 0", f"up_jump_rate={spec.up_jump_rate}")
    elif isinstance(spec, DiffusionSpec):
        if spec.family not in _DIFFUSION_FAMILIES:
            rep.add("known diffusion family", f"family={spec.family!r}")
        else:
            p = spec.params
            if not (p.get("sigma", 0) > 0):
                rep.add("sigma > 0", f"sigma={p.get('sigma')}")
            if spec.family == "ou" and not (p.get("kappa", 0) >= 0):
                rep.add("kappa ≥ 0", f"kappa={p.get('kappa')}")
    elif isinstance(spec, RefractedSpec):
        _validate_levy(spec.base, rep)
        if not (spec.refraction >= 0):
            rep.add("refraction ≥ 0", f"refraction={spec.refraction}")
        if isinstance(spec.base, CramerLundbergSpec) and not (spec.base.premium - spec.refraction > 0):
            rep.add("premium - refraction > 0", f"{spec.base.premium} - {spec.refraction}")
        if not _finite(spec.threshold):
            rep.add("threshold finite", f"threshold={spec.threshold}")
    else:
        rep.add("known model family", f"unsupported spec type {type(spec).__name__}")

    if query is not None:
        _validate_query(spec, query, rep)
    return rep


def _validate_query(spec, query: DrawdownQuery, rep: ValidationReport) -> None:
    for name in ("q", "s", "delta"):
        val = getattr(query, name)
        if not (val >= 0):
            rep.add(f"{name} ≥ 0", f"{name}={val}")
    if not (query.a > 0):
        rep.add("a > 0", f"a={query.a}")
    if not (query.x0 <= query.K):
        rep.add("x0 ≤ K", f"x0={query.x0}, K={query.K}")
    if isinstance(spec, PempSpec) and not (query.x0 >= query.a):
        rep.add("x0 ≥ a", f"x0={query.x0} < a={query.a}")
    if isinstance(spec, DiffusionSpec) and spec.family == "gbm":
        if not (query.x0 - query.a > 0):
            rep.add("x0 - a > 0", f"gbm state space is (0, inf); x0 - a = {query.x0 - query.a}")
