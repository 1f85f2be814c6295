"""Residue-kernel exit quantities and rates for the two jump models.

Both models reduce the two-sided exit problem on (u, v) to a small linear
system ``M(u, v) n = e`` whose inverse ``N`` gives the exit quantities as
combinations of basis functions ``g_i``. Rates are ``D = dN/dv`` evaluated on
the diagonal (u, v) = (x - a, x), computed as ``D = -N (dM/dv) N``.

All functions broadcast over leading array dimensions of ``u``, ``v`` and ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import erfcx, ndtr

from .errors import DomainError, QuadratureError, SingularError, UnsupportedArgumentError
from .model import GenPempSpec, PempSpec
from .ratefield import RateField

__all__ = [
    "COND_LIMIT",
    "ExitMatrixSet",
    "ExitQuantities",
    "pemp_basis",
    "pemp_matrix",
    "pemp_exit",
    "pemp_rates",
    "pemp_rate_arrays",
    "pemp_rates_renewal",
    "jd_basis",
    "jd_matrix",
    "jd_exit",
    "jd_rates",
    "jd_rate_arrays",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ExitMatrixSet:
    u: np.ndarray
    v: np.ndarray
    M: np.ndarray
    N: np.ndarray
    D: np.ndarray
    dM: np.ndarray


@dataclass(frozen=True)
class ExitQuantities:
    """Two-sided exit quantities at q = 0 on (u, v)."""

    u: float
    v: float
    B1: Callable
    B2_amp: Callable
    C: Callable

    def B2_density(self, x, z):
        return np.exp(-np.asarray(z, dtype=float)) * self.B2_amp(x)

    def total(self, x):
        """B1 + mass of B2 + C at s = 0; equals 1 when exit is certain."""
        return self.B1(x) + self.B2_amp(x) + self.C(x, 0.0)


def _invert(M: np.ndarray, dM: np.ndarray, u, v) -> ExitMatrixSet:
    # rows of M mix exp(+-v) scales; equilibrate before inverting
    scale = np.max(np.abs(M), axis=-1, keepdims=True)
    Ms = M / scale
    cond = np.linalg.cond(Ms)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularError(f"exit matrix ill-conditioned (cond={np.max(cond):.3g})")
    Ns = np.linalg.inv(Ms)
    N = Ns / np.swapaxes(scale, -1, -2)
    D = -N @ dM @ N
    return ExitMatrixSet(np.asarray(u), np.asarray(v), M, N, D, dM)


def _rowdot(N_row, g):
    return np.sum(N_row * g, axis=-1)


# --- PEMP ------------------------------------------------------------------

_PEMP_POLES = np.array([2.0, 1.0, 0.0, -1.0])
_PEMP_COEF = np.array([1.0 / 6.0, -0.5, 0.5, -1.0 / 6.0])


def pemp_basis(x):
    """g(x) = (e^{-2x}/6, -e^{-x}/2, 1/2, -e^{x}/6), stacked on the last axis."""
    x = np.asarray(x, dtype=float)[..., None]
    return _PEMP_COEF * np.exp(-_PEMP_POLES * x)


def pemp_matrix(u, v) -> ExitMatrixSet:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u <= 0) or np.any(v <= u):
        raise DomainError("pemp_matrix needs 0 < u < v")
    shape = np.broadcast(u, v).shape
    u = np.broadcast_to(u, shape)
    v = np.broadcast_to(v, shape)
    eu, ev = np.exp(u), np.exp(v)
    emu, emv = np.exp(-u), np.exp(-v)
    gv = pemp_basis(v)
    M = np.empty(shape + (4, 4))
    M[..., 0, 0] = -emu * emu * (u + 11.0 / 6.0) / 3.0
    M[..., 0, 1] = emu * emu / 6.0
    M[..., 0, 2] = emv * emv / 18.0
    M[..., 1, 0] = emu
    M[..., 1, 1] = emu / 2.0 * (u + 0.5)
    M[..., 1, 2] = -emv / 4.0
    M[..., 2, 0] = -0.5
    M[..., 2, 1] = -0.5
    M[..., 2, 2] = 0.5
    M[..., 3, 0] = eu / 9.0
    M[..., 3, 1] = eu / 12.0
    M[..., 3, 2] = ev / 6.0 * (v - 11.0 / 6.0)
    M[..., :, 3] = gv
    dM = np.zeros_like(M)
    dM[..., 0, 2] = -emv * emv / 9.0
    dM[..., 1, 2] = emv / 4.0
    dM[..., 3, 2] = ev / 6.0 * (v - 5.0 / 6.0)
    dM[..., :, 3] = -_PEMP_POLES * gv
    return _invert(M, dM, u, v)


def _pemp_c_coef(s: float) -> tuple[float, float]:
    return -2.0 / (s + 2.0), -1.0 / (s + 1.0)


def pemp_exit(u: float, v: float) -> ExitQuantities:
    ms = pemp_matrix(u, v)
    N = ms.N

    def B1(x):
        return _rowdot(N[3], pemp_basis(x))

    def B2_amp(x):
        return _rowdot(N[2], pemp_basis(x))

    def C(x, s=0.0):
        k0, k1 = _pemp_c_coef(s)
        return _rowdot(k0 * N[0] + k1 * N[1], pemp_basis(x))

    return ExitQuantities(float(u), float(v), B1, B2_amp, C)


def pemp_rate_arrays(x, a: float, s: float = 0.0):
    """Vectorized (b1, b2_amp, c) for the reference PEMP."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= a):
        raise DomainError(f"PEMP rates need x > a (got min x = {np.min(x)})")
    D = pemp_matrix(x - a, x).D
    g = pemp_basis(x)
    k0, k1 = _pemp_c_coef(s)
    b1 = -_rowdot(D[..., 3, :], g)
    b2 = _rowdot(D[..., 2, :], g)
    c = _rowdot(k0 * D[..., 0, :] + k1 * D[..., 1, :], g)
    return b1, b2, c


def _require_reference_pemp(spec: PempSpec | None) -> None:
    if spec is not None and not spec.is_reference_instance():
        raise UnsupportedArgumentError("the PEMP kernel is available for the reference instance only")


def pemp_rates(a: float, s: float = 0.0, spec: PempSpec | None = None) -> RateField:
    _require_reference_pemp(spec)
    if not a > 0:
        raise DomainError("a must be positive")

    def pick(i):
        def f(x):
            r = pemp_rate_arrays(x, a, s)[i]
            return r if np.ndim(x) else float(r)
        return f

    def c_fn(x, s_arg):
        r = pemp_rate_arrays(x, a, s_arg)[2]
        return r if np.ndim(x) else float(r)

    return RateField(b1_fn=pick(0), c_fn=c_fn, b2_amp_fn=pick(1), kernel_rates=(1.0,),
                     kernel_weights=(1.0,), valid_domain=(a, math.inf), q=0.0, s=s, a=a,
                     tag="pemp")


def _quad(f, lo, hi, **kw) -> float:
    val, err = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=200, **kw)
    if not math.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quad on [{lo}, {hi}] returned {val} +- {err}")
    return val


def pemp_rates_renewal(a: float, x: float, s: float = 0.0, spec: PempSpec | None = None):
    """(b1, c) from the first-jump renewal argument, integrating the exit quantities.

    Independent of the D-matrix route: only N (not its derivative) enters.
    """
    spec = spec or PempSpec()
    if not x > a:
        raise DomainError("renewal rates need x > a")
    lam, mu = spec.jump_rate, spec.drift_coef
    down = [c for c in spec.jump_mix if c.direction == "down"]

    def dens(w):  # density of the jump size on w < 0
        return sum(c.weight * c.rate * math.exp(c.rate * w) for c in down)

    ex = pemp_exit(x - a, x)
    pre = lam / (mu * x)
    i_b1 = _quad(lambda w: float(ex.B1(x + w)) * dens(w), -a, 0.0)
    b1 = pre * (1.0 - i_b1)
    i_c = _quad(lambda w: float(ex.C(x + w, s)) * dens(w), -a, 0.0)
    # jumps below the lower level leave immediately with undershoot -(w + a)
    tail = sum(c.weight * c.rate / (c.rate + s) * math.exp(-c.rate * a) for c in down)
    return b1, pre * (i_c + tail)


# --- jump diffusion ----------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _qbar(x):
    return ndtr(-x)


def _tail_e(x):
    """exp(x + 1/2) * (1 - Phi(x + 1)) without overflow."""
    return 0.5 * np.exp(-0.5 * x * x) * erfcx((x + 1.0) / _SQRT2)


def _phi(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def jd_basis(x):
    """g(x) = (1, -e^{x+1/2}, 1 - int_0^inf Phi(x+y) e^{-y} dy)."""
    x = np.asarray(x, dtype=float)
    return np.stack([np.ones_like(x), -np.exp(x + 0.5), _qbar(x) - _tail_e(x)], axis=-1)


def _jd_basis_prime(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.zeros_like(x), -np.exp(x + 0.5), -_tail_e(x)], axis=-1)


def _jd_col1(v):
    return np.stack([np.ones_like(v), v * np.exp(v + 0.5), _qbar(v) - _phi(v) + v * _tail_e(v)], axis=-1)


def _jd_col1_prime(v):
    return np.stack(
        [np.zeros_like(v), (1.0 + v) * np.exp(v + 0.5), -_phi(v) + (1.0 + v) * _tail_e(v)], axis=-1
    )


# Far left, g3 -> 1 and -e^{x+1/2} -> 0 while both carry the same leading tail, so the
# rows of M in the g basis become nearly dependent. The rates are unchanged by the
# constant change of basis g3 -> g1 + g2 - g3 = Phi(x) - e^{x+1/2} Phi(x+1), whose
# components below are evaluated through erfcx without cancellation.
_STABLE_BELOW = -1.0


def _e_phi_shift(x):
    """e^{x+1/2} Phi(x+1)."""
    return 0.5 * np.exp(-0.5 * x * x) * erfcx(-(x + 1.0) / _SQRT2)


def _phi_cdf(x):
    return 0.5 * np.exp(-0.5 * x * x) * erfcx(-x / _SQRT2)


def _jd_alt_basis(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.ones_like(x), -np.exp(x + 0.5), _phi_cdf(x) - _e_phi_shift(x)], axis=-1)


def _jd_alt_basis_prime(x):
    x = np.asarray(x, dtype=float)
    return np.stack([np.zeros_like(x), -np.exp(x + 0.5), -_e_phi_shift(x)], axis=-1)


def _jd_alt_col1(v):
    return np.stack([np.ones_like(v), v * np.exp(v + 0.5), _phi_cdf(v) + _phi(v) + v * _e_phi_shift(v)], axis=-1)


def _jd_alt_col1_prime(v):
    return np.stack([np.zeros_like(v), (1.0 + v) * np.exp(v + 0.5), _phi(v) + (1.0 + v) * _e_phi_shift(v)], axis=-1)


def _jd_system(u, v, alt: bool = False):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v <= u):
        raise DomainError("jd_matrix needs u < v")
    shape = np.broadcast(u, v).shape
    u = np.broadcast_to(u, shape)
    v = np.broadcast_to(v, shape)
    col1, col1p, basis, basisp = ((_jd_alt_col1, _jd_alt_col1_prime, _jd_alt_basis, _jd_alt_basis_prime) if alt
                                  else (_jd_col1, _jd_col1_prime, jd_basis, _jd_basis_prime))
    M = np.stack([col1(v), basis(v), basis(u)], axis=-1)
    dM = np.stack([col1p(v), basisp(v), np.zeros(shape + (3,))], axis=-1)
    return M, dM, u, v


def jd_matrix(u, v) -> ExitMatrixSet:
    return _invert(*_jd_system(u, v))


def _require_reference_jd(spec: GenPempSpec | None) -> None:
    if spec is not None and not spec.is_reference_instance():
        raise UnsupportedArgumentError("the jump-diffusion kernel is available for the reference instance only")


def jd_exit(u: float, v: float) -> ExitQuantities:
    N = jd_matrix(u, v).N

    def B1(x):
        return _rowdot(N[1], jd_basis(x))

    def B2_amp(x):
        return _rowdot(N[0], jd_basis(x))

    def C(x, s=0.0):
        if s != 0.0:
            raise UnsupportedArgumentError("jump-diffusion C is available at s = 0 only")
        return _rowdot(N[2], jd_basis(x))

    return ExitQuantities(float(u), float(v), B1, B2_amp, C)


def jd_rate_arrays(x, a: float):
    x = np.asarray(x, dtype=float)
    alt = x < _STABLE_BELOW
    M, dM, _, _ = _jd_system(x - a, x)
    if np.any(alt):
        Ma, dMa, _, _ = _jd_system(x - a, x, alt=True)
        M = np.where(alt[..., None, None], Ma, M)
        dM = np.where(alt[..., None, None], dMa, dM)
    D = _invert(M, dM, x - a, x).D
    g = np.where(alt[..., None], _jd_alt_basis(x), jd_basis(x))
    return -_rowdot(D[..., 1, :], g), _rowdot(D[..., 0, :], g), _rowdot(D[..., 2, :], g)


def jd_rates(a: float, s: float = 0.0, spec: GenPempSpec | None = None) -> RateField:
    _require_reference_jd(spec)
    if s != 0.0:
        raise UnsupportedArgumentError("jump-diffusion rates are available at s = 0 only")
    if not a > 0:
        raise DomainError("a must be positive")

    def pick(i):
        def f(x):
            r = jd_rate_arrays(x, a)[i]
            return r if np.ndim(x) else float(r)
        return f

    def c_fn(x, s_arg):
        if s_arg != 0.0:
            raise UnsupportedArgumentError("jump-diffusion rates are available at s = 0 only")
        return pick(2)(x)

    return RateField(b1_fn=pick(0), c_fn=c_fn, b2_amp_fn=pick(1), kernel_rates=(1.0,),
                     kernel_weights=(1.0,), q=0.0, s=0.0, a=a, tag="jd")
