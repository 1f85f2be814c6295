"""Scale functions and local drawdown rates for spectrally negative models.

Both supported Levy families have rational Laplace exponents, so
``1 / (psi(beta) - q)`` inverts to

    W(x) = exp(m x) * (A cosh(d x) + B sinh(d x) / d)

with the two roots of ``psi(beta) = q`` equal to ``m +- d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError, SingularError, UnsupportedArgumentError
from .model import (
    BrownianLevySpec,
    CramerLundbergSpec,
    DiffusionSpec,
    DrawdownQuery,
    RefractedSpec,
)
from .ratefield import RateField, constant_rates

__all__ = [
    "ScaleFunctionSet",
    "NaturalScale",
    "scale_W",
    "scale_W_prime",
    "scale_Z",
    "snlp_local_rates",
    "snlp_joint_lt",
    "snlp_rate_field",
    "refracted_local_rates",
    "refracted_rate_field",
    "diffusion_rates_q0",
    "diffusion_rate_array",
    "diffusion_rate_field",
]

LevySpec = Union[BrownianLevySpec, CramerLundbergSpec]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _coefficients(spec: LevySpec, q: float) -> tuple[float, float, float, float]:
    """(A, B, m, d) of the closed form. ``q`` may be negative after tilting."""
    if isinstance(spec, BrownianLevySpec):
        mu, sig2 = spec.drift, spec.volatility**2
        disc = max(mu * mu + 2.0 * q * sig2, 0.0)
        return 0.0, 2.0 / sig2, -mu / sig2, math.sqrt(disc) / sig2
    if isinstance(spec, CramerLundbergSpec):
        c, lam, eta = spec.premium, spec.claim_rate, spec.claim_decay
        bq = c * eta - q - lam
        disc = max(bq * bq + 4.0 * c * q * eta, 0.0)
        m = -bq / (2.0 * c)
        return 1.0 / c, (eta + m) / c, m, math.sqrt(disc) / (2.0 * c)
    raise UnsupportedArgumentError(f"no closed-form scale function for {type(spec).__name__}")


def _shc(d: float, x):
    return x if d == 0.0 else np.sinh(d * x) / d


def _combo(A: float, B: float, m: float, d: float, x):
    """exp(m x) (A cosh(d x) + B sinh(d x) / d), split into two exponentials when d x is large."""
    with np.errstate(over="ignore", invalid="ignore"):
        near = np.exp(m * x) * (A * np.cosh(d * x) + B * _shc(d, x))
        if d == 0.0:
            return near
        far = 0.5 * ((A + B / d) * np.exp((m + d) * x) + (A - B / d) * np.exp((m - d) * x))
    return np.where(d * x > 1.0, far, near) if np.ndim(near) else (far if d * x > 1.0 else near)


def _expm1_over(beta: float, x):
    return x if beta == 0.0 else np.expm1(beta * x) / beta


@dataclass(frozen=True)
class ScaleFunctionSet:
    """W, W', Z and Z' of one Levy spec; ``q`` may be any real for which the roots are real."""

    spec: LevySpec

    def W(self, q: float, x):
        A, B, m, d = _coefficients(self.spec, q)
        return _combo(A, B, m, d, np.asarray(x, dtype=float))

    def W_prime(self, q: float, x):
        """Right derivative of W (relevant at 0 for the bounded-variation case)."""
        A, B, m, d = _coefficients(self.spec, q)
        return _combo(m * A + B, m * B + A * d * d, m, d, np.asarray(x, dtype=float))

    def W_integral(self, q: float, x):
        """Integral of W over [0, x]."""
        A, B, m, d = _coefficients(self.spec, q)
        x = np.asarray(x, dtype=float)
        if d * np.max(np.abs(x), initial=0.0) > 1e-2:
            ep, em = _expm1_over(m + d, x), _expm1_over(m - d, x)
            return A * 0.5 * (ep + em) + B * (ep - em) / (2.0 * d)
        # nearly coincident roots: the divided difference cancels, so integrate directly
        half = 0.5 * x
        nodes = half[..., None] * (_GL_X + 1.0)
        vals = np.exp(m * nodes) * (A * np.cosh(d * nodes) + B * _shc(d, nodes))
        return half * (vals @ _GL_W)

    def Z(self, q: float, x):
        x = np.asarray(x, dtype=float)
        if q == 0.0:
            return np.ones_like(x) if x.ndim else 1.0
        return 1.0 + q * self.W_integral(q, x)

    def Z_prime(self, q: float, x):
        return q * self.W(q, x)

    def tilt(self, s: float) -> "ScaleFunctionSet":
        """Scale functions under the exponentially tilted measure; evaluate at p = q - psi(s)."""
        return ScaleFunctionSet(self.spec.tilted(s))


def _check_x(x) -> None:
    if np.any(np.asarray(x) < 0):
        raise DomainError("scale functions are evaluated at x >= 0")


def scale_W(spec: LevySpec, q: float, x):
    _check_x(x)
    return ScaleFunctionSet(spec).W(q, x)


def scale_W_prime(spec: LevySpec, q: float, x):
    _check_x(x)
    return ScaleFunctionSet(spec).W_prime(q, x)


def scale_Z(spec: LevySpec, q: float, x):
    _check_x(x)
    return ScaleFunctionSet(spec).Z(q, x)


def _root_product_ratio(spec: LevySpec) -> float:
    """p / (r1 r2) for the two roots of psi = p; independent of p."""
    if isinstance(spec, BrownianLevySpec):
        return -0.5 * spec.volatility**2
    return -spec.premium / spec.claim_decay


def _c_core(spec: LevySpec, p: float, a: float) -> float:
    """(Z W' - p W^2) / W at a.

    Z W' and p W^2 both grow like W^2 and cancel; with W = alpha e^{r1 x} +
    beta e^{r2 x} the difference is expanded analytically and scaled by e^{-r1 a}.
    """
    A, B, m, d = _coefficients(spec, p)
    sf = ScaleFunctionSet(spec)
    if d * a <= 1e-3:
        w = float(sf.W(p, a))
        if w <= 0.0:
            raise SingularError(f"W vanishes at a={a}")
        return (float(sf.Z(p, a)) * float(sf.W_prime(p, a)) - p * w * w) / w
    r1, r2 = m + d, m - d
    al, be = 0.5 * (A + B / d), 0.5 * (A - B / d)
    rho = math.exp(-2.0 * d * a)
    e2 = math.exp(r2 * a)
    k0 = _root_product_ratio(spec)
    den = al + be * rho
    if den <= 0.0:
        raise SingularError(f"W vanishes at a={a}")
    cross = al * be * k0 * ((r1 - r2) ** 2 * e2 - r2 * r2 * rho - r1 * r1)
    num = al * r1 + be * r2 * rho - p * al * al - p * be * be * rho + cross
    return num / den


def _tilted_c(spec: LevySpec, q: float, s: float, a: float) -> float:
    p = q - spec.laplace_exponent(s)
    return math.exp(s * a) * _c_core(spec.tilted(s), p, a)


def snlp_local_rates(spec: LevySpec, q: float, s: float, a: float) -> tuple[float, float]:
    """(b1, c); these do not depend on the current level."""
    if not a > 0:
        raise DomainError("a must be positive")
    sf = ScaleFunctionSet(spec)
    w = float(sf.W(q, a))
    if w <= 0.0:
        raise SingularError(f"W^({q}) vanishes at a={a}")
    b1 = float(sf.W_prime(q, a)) / w
    if s == 0.0:
        c = b1 if q == 0.0 else _c_core(spec, q, a)
    else:
        c = _tilted_c(spec, q, s, a)
    return b1, c


def snlp_joint_lt(spec: LevySpec, query: DrawdownQuery) -> float:
    """E[exp(-q tau - s (Y - a) - delta M)] for the process started at 0."""
    b1, c = snlp_local_rates(spec, query.q, query.s, query.a)
    den = query.delta + b1
    if den <= 0.0:
        raise SingularError("delta + b1 vanishes")
    return c / den


def snlp_rate_field(spec: LevySpec, q: float, s: float, a: float) -> RateField:
    b1, c = snlp_local_rates(spec, q, s, a)

    def c_fn(x, s_arg):
        val = c if s_arg == s else snlp_local_rates(spec, q, s_arg, a)[1]
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, val) if x.ndim else val

    rf = constant_rates(b1, c, a=a, tag=spec.tag)
    import dataclasses

    return dataclasses.replace(rf, c_fn=c_fn, q=q, s=s)


# --- refracted Levy -------------------------------------------------------


def _quad(f, lo, hi) -> float:
    if hi <= lo:
        return 0.0
    val, err = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=200)
    if not math.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quad on [{lo}, {hi}] returned {val} +- {err}")
    return val


def refracted_local_rates(spec: RefractedSpec, q: float, x: float, a: float) -> tuple[float, float]:
    """(b1, c) at level ``x`` with s = 0."""
    if not a > 0:
        raise DomainError("a must be positive")
    base, lam, b = spec.base, spec.refraction, spec.threshold
    if lam == 0.0 or b >= x:
        return snlp_local_rates(base, q, 0.0, a)
    if b <= x - a:
        return snlp_local_rates(base.with_drift_reduced(lam), q, 0.0, a)

    U = ScaleFunctionSet(base)
    R = ScaleFunctionSet(base.with_drift_reduced(lam))
    W = lambda y: float(U.W(q, y))
    Wp = lambda y: float(U.W_prime(q, y))
    RW = lambda y: float(R.W(q, y))
    RWp = lambda y: float(R.W_prime(q, y))

    lo = b - x + a
    f1 = 1.0 + lam * RW(0.0)
    i_wwp = _quad(lambda y: RW(a - y) * Wp(y), lo, a)
    i_wpwp = _quad(lambda y: RWp(a - y) * Wp(y), lo, a)
    Wa, Wpa = W(a), Wp(a)
    den = Wa + lam * i_wwp
    if den <= 0.0:
        raise SingularError("refracted denominator vanishes")
    b1 = (f1 * Wpa + lam * i_wpwp) / den
    if q == 0.0:
        return b1, b1

    Za = float(U.Z(q, a))
    i_mix = _quad(lambda y: RW(a - y) * (Wpa * W(y) - Wa * Wp(y)), lo, a)
    i_wpw = _quad(lambda y: RWp(a - y) * W(y), lo, a)
    i_ww = _quad(lambda y: RW(a - y) * W(y), lo, a)
    k = (
        f1 * (Za * Wpa - q * Wa * Wa)
        + lam * q * f1 * i_mix
        - lam * q * den * i_wpw
        + lam * (Za + lam * q * i_ww) * i_wpwp
    )
    return b1, k / den


def refracted_rate_field(spec: RefractedSpec, q: float, a: float) -> RateField:
    def pair(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([refracted_local_rates(spec, q, float(v), a) for v in xs.ravel()])
        return out.reshape(xs.shape + (2,))

    def b1_fn(x):
        r = pair(x)[..., 0]
        return r if np.ndim(x) else float(r[0])

    def c_fn(x, s):
        if s != 0.0:
            raise UnsupportedArgumentError("refracted rates are available for s = 0 only")
        r = pair(x)[..., 1]
        return r if np.ndim(x) else float(r[0])

    return RateField(b1_fn=b1_fn, c_fn=c_fn, q=q, s=0.0, a=a, tag="refracted",
                     spectrally_negative=True)


# --- linear diffusions at q = 0 -------------------------------------------


@dataclass(frozen=True)
class NaturalScale:
    """Natural scale anchored at ``x_ref``: S(x_ref) = 0, S'(x_ref) = 1."""

    spec: DiffusionSpec
    x_ref: float = 0.0

    def S_prime(self, x):
        return np.exp(-self.spec.drift_ratio_integral(self.x_ref, x))

    def S(self, x) -> float:
        return _quad(lambda y: float(self.S_prime(y)), self.x_ref, x) if x >= self.x_ref else \
            -_quad(lambda y: float(self.S_prime(y)), x, self.x_ref)


def diffusion_rates_q0(spec: DiffusionSpec, x: float, a: float) -> tuple[float, float]:
    """b1 = c = S'(x) / (S(x) - S(x - a)).

    The ratio is evaluated as 1 / int_{x-a}^x S'(y)/S'(x) dy, which is
    independent of the anchor and cannot overflow for large x.
    """
    if not a > 0:
        raise DomainError("a must be positive")
    lo_dom, hi_dom = spec.domain
    if not (x - a > lo_dom and x < hi_dom):
        raise DomainError(f"[x-a, x] = [{x - a}, {x}] leaves the state space {spec.domain}")
    integral = _quad(lambda y: math.exp(float(spec.drift_ratio_integral(y, x))), x - a, x)
    rate = 1.0 / integral
    return rate, rate


_DIFF_X, _DIFF_W = np.polynomial.legendre.leggauss(64)
_DIFF_X2, _DIFF_W2 = np.polynomial.legendre.leggauss(96)


def _diffusion_inv_rate(spec: DiffusionSpec, xs: np.ndarray, a: float, gx, gw) -> np.ndarray:
    ys = xs[:, None] - 0.5 * a * (1.0 - gx)
    return 0.5 * a * np.exp(spec.drift_ratio_integral(ys, xs[:, None])) @ gw


def diffusion_rate_array(spec: DiffusionSpec, x, a: float) -> np.ndarray:
    """Vectorized ``diffusion_rates_q0`` by fixed Gauss-Legendre rules.

    Points where the 64- and 96-node rules disagree beyond 1e-13 relative
    are recomputed with adaptive quadrature.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    lo_dom, hi_dom = spec.domain
    if np.any(~(xs - a > lo_dom)) or np.any(~(xs < hi_dom)):
        raise DomainError(f"[x-a, x] leaves the state space {spec.domain}")
    with np.errstate(over="ignore", invalid="ignore"):
        i1 = _diffusion_inv_rate(spec, xs, a, _DIFF_X, _DIFF_W)
        i2 = _diffusion_inv_rate(spec, xs, a, _DIFF_X2, _DIFF_W2)
    bad = ~(np.abs(i1 - i2) <= 1e-13 * np.abs(i2)) | ~np.isfinite(i2)
    out = 1.0 / i2
    for k in np.flatnonzero(bad):
        out[k] = diffusion_rates_q0(spec, float(xs[k]), a)[0]
    return out.reshape(np.shape(x))


def diffusion_rate_field(spec: DiffusionSpec, a: float) -> RateField:
    if not a > 0:
        raise DomainError("a must be positive")

    def b1_fn(x):
        r = diffusion_rate_array(spec, x, a)
        return r if np.ndim(x) else float(r)

    def c_fn(x, s):
        if s != 0.0:
            raise UnsupportedArgumentError("diffusion rates are available for q = s = 0 only")
        return b1_fn(x)

    lo = spec.domain[0] + a
    return RateField(b1_fn=b1_fn, c_fn=c_fn, valid_domain=(lo, math.inf), q=0.0, s=0.0, a=a,
                     tag=f"diffusion-{spec.family}", spectrally_negative=True)
