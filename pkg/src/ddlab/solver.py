"""Solvers for the drawdown integral equation

    h(x) = int_x^K exp(-int_x^y b1) (c(y) + int_[0, K-y) h(y+z) b2(y, dz)) dy,

equivalently h' = b1 h - c - int h(y+z) b2(y, dz) with h(K) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    InstabilityError,
    NonConvergenceError,
    NonFiniteRateError,
    PreconditionError,
    SingularError,
)
from .model import DrawdownQuery
from .ratefield import RateField

__all__ = [
    "SolverConfig",
    "SolveMeta",
    "HCurve",
    "make_grid",
    "default_x_min",
    "solve",
    "solve_backward",
    "solve_picard",
    "solve_spectrally_negative",
    "levy_joint_lt",
    "RateViolation",
    "RateInequalityReport",
    "check_rate_inequality",
    "contraction_bound",
]

METHODS = ("backward_rk4", "picard", "both")


@dataclass(frozen=True)
class SolverConfig:
    grid_step: Optional[float] = None  # default a / 200
    picard_tol: float = 1e-10
    picard_max_iter: int = 200
    method: str = "backward_rk4"
    x_min: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.grid_step is not None and not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if not self.picard_tol > 0 or self.picard_max_iter < 1:
            raise ValueError("picard_tol and picard_max_iter must be positive")


@dataclass(frozen=True)
class SolveMeta:
    q: float
    s: float
    a: float
    K: float
    tag: str
    method: str
    iterations: int = 0
    contraction_estimate: float = float("nan")
    contraction_bound: float = float("nan")


@dataclass(frozen=True)
class HCurve:
    xs: np.ndarray
    hs: np.ndarray
    meta: SolveMeta

    def at(self, x):
        """Cubic-spline interpolation of h (exact at grid nodes)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.xs, x)
        idx = np.clip(idx, 0, len(self.xs) - 1)
        hit = np.isclose(self.xs[idx], x, rtol=0, atol=1e-12)
        spline = CubicSpline(self.xs, self.hs)
        out = np.where(hit, self.hs[idx], spline(x))
        return out if out.ndim else float(out)


def default_x_min(rates: RateField, K: float) -> float:
    if rates.tag == "pemp":
        return rates.a * (1.0 + 1e-9)
    lo = rates.valid_domain[0]
    x_min = K - 10.0 * rates.a
    if math.isfinite(lo) and x_min <= lo:
        x_min = lo + 1e-9 * max(1.0, abs(lo))
    return x_min


def make_grid(x_min: float, K: float, step: float) -> np.ndarray:
    """Ascending grid anchored at K with uniform ``step``; the first cell may be shorter."""
    if not x_min < K:
        raise PreconditionError(f"need x_min < K (got {x_min}, {K})")
    n = int(math.floor((K - x_min) / step * (1.0 + 1e-12)))
    pts = K - step * np.arange(n, -1, -1, dtype=float)
    if pts[0] - x_min > 1e-9 * step:
        pts = np.concatenate(([x_min], pts))
    else:
        pts[0] = x_min
    return pts


def _prepare(rates: RateField, query: DrawdownQuery, cfg: SolverConfig):
    if not math.isfinite(query.K):
        raise PreconditionError("the grid solvers need a finite maximum cap K")
    step = cfg.grid_step if cfg.grid_step is not None else query.a / 200.0
    x_min = cfg.x_min if cfg.x_min is not None else min(default_x_min(rates, query.K), query.x0)
    if rates.tag == "pemp":
        x_min = max(x_min, rates.a * (1.0 + 1e-9))
    return make_grid(x_min, query.K, step)


def _meta(rates, query, method, **kw) -> SolveMeta:
    return SolveMeta(q=rates.q, s=rates.s, a=rates.a, K=query.K, tag=rates.tag, method=method, **kw)


def _rates_with_s(rates: RateField, query: DrawdownQuery) -> RateField:
    return rates if query.s == rates.s else rates.with_s(query.s)


# --- backward RK4 ----------------------------------------------------------


def solve_backward(rates: RateField, query: DrawdownQuery, cfg: SolverConfig = SolverConfig()) -> HCurve:
    """Classical RK4 on the OIDE, marching from K down to x_min.

    The exponential-mixture jump kernel is handled exactly through the
    auxiliary states I_j(y) = int_y^K h(w) eta_j exp(-eta_j (w - y)) dw,
    which satisfy I_j' = eta_j (I_j - h).
    """
    rates = _rates_with_s(rates, query)
    xs = _prepare(rates, query, cfg)
    mids = 0.5 * (xs[:-1] + xs[1:])
    b1n, b2n, cn = rates.evaluate(xs)
    b1m, b2m, cm = rates.evaluate(mids)
    eta = np.asarray(rates.kernel_rates, dtype=float)
    wts = np.asarray(rates.kernel_weights, dtype=float)
    atom = rates.atom0
    jumps = (not rates.spectrally_negative) and (np.any(b2n != 0) or np.any(b2m != 0))

    def deriv(h, I, b1, b2, c):
        dh = (b1 - atom) * h - c
        if jumps:
            dh -= b2 * float(wts @ I)
        return dh, eta * (I - h)

    n = len(xs)
    hs = np.zeros(n)
    h = 0.0
    I = np.zeros_like(eta)
    for i in range(n - 1, 0, -1):
        dx = xs[i - 1] - xs[i]  # negative
        k1h, k1I = deriv(h, I, b1n[i], b2n[i], cn[i])
        k2h, k2I = deriv(h + 0.5 * dx * k1h, I + 0.5 * dx * k1I, b1m[i - 1], b2m[i - 1], cm[i - 1])
        k3h, k3I = deriv(h + 0.5 * dx * k2h, I + 0.5 * dx * k2I, b1m[i - 1], b2m[i - 1], cm[i - 1])
        k4h, k4I = deriv(h + dx * k3h, I + dx * k3I, b1n[i - 1], b2n[i - 1], cn[i - 1])
        h = h + dx / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
        I = I + dx / 6.0 * (k1I + 2.0 * k2I + 2.0 * k3I + k4I)
        if not math.isfinite(h) or abs(h) > 1.0 + 1e-6:
            raise InstabilityError(f"|h| = {h!r} at x = {xs[i - 1]} leaves [0, 1]")
        hs[i - 1] = h
    return HCurve(xs, hs, _meta(rates, query, "backward_rk4"))


# --- Picard ----------------------------------------------------------------


def _cell_weights(xs: np.ndarray, order: int = 4):
    """Exact integrals over each cell [x_i, x_{i+1}] of the interpolant through ``order`` nodes.

    Returns (nodes, weights), both of shape (n_cells, order). Node windows are
    centred on the cell where possible and shifted inwards at the two ends.
    """
    n = len(xs)
    order = min(order, n)
    ncell = n - 1
    start = np.clip(np.arange(ncell) - (order - 2) // 2, 0, n - order)
    nodes = start[:, None] + np.arange(order)
    t = xs[nodes]
    lo, hi = xs[:-1], xs[1:]
    gx, gw = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    pts = half[:, None] * (gx + 1.0) + lo[:, None]
    W = np.zeros((ncell, order))
    for k in range(order):
        L = np.ones_like(pts)
        for j in range(order):
            if j != k:
                L *= (pts - t[:, [j]]) / (t[:, [k]] - t[:, [j]])
        W[:, k] = half * (L @ gw)
    return nodes, W


def _cumulative_from_right(xs, f, nodes, W):
    """F(x_i) = int_{x_i}^{K} f, using the cell rule."""
    cell = np.sum(W * f[nodes], axis=1)
    out = np.zeros(len(xs))
    out[:-1] = np.cumsum(cell[::-1])[::-1]
    return out


def _backward_linear(alpha, beta):
    """Solve F_i = alpha_i F_{i+1} + beta_i with F_n = 0."""
    n = len(alpha) + 1
    out = [0.0] * n
    acc = 0.0
    for i in range(n - 2, -1, -1):
        acc = alpha[i] * acc + beta[i]
        out[i] = acc
    return np.array(out)


class _PicardOperator:
    def __init__(self, rates: RateField, xs: np.ndarray):
        self.xs = xs
        self.b1, self.b2, self.c = rates.evaluate(xs)
        self.eta = np.asarray(rates.kernel_rates, dtype=float)
        self.wts = np.asarray(rates.kernel_weights, dtype=float)
        self.atom = rates.atom0
        self.jumps = (not rates.spectrally_negative) and bool(np.any(self.b2 != 0))
        self.nodes, self.W = _cell_weights(xs)
        # B(x_i) measured from K, so exp(-(B(y) - B(x))) = exp(Bk(x) - Bk(y)) with Bk = int_x^K b1
        self.Bk = _cumulative_from_right(xs, self.b1, self.nodes, self.W)
        self.left = self.nodes[:, 0]
        self.cell_decay = np.exp(self.Bk[1:] - self.Bk[:-1])  # exp(-int_cell b1)

    def _weighted_cell(self, g: np.ndarray, log_w: np.ndarray) -> np.ndarray:
        """int over cell i of exp(-(L(y) - L(x_i))) g(y), L given at nodes by -log_w."""
        nodes = self.nodes
        i = np.arange(len(self.xs) - 1)
        wexp = np.exp(log_w[nodes] - log_w[i][:, None])
        return np.sum(self.W * wexp * g[nodes], axis=1)

    def apply(self, h: np.ndarray) -> np.ndarray:
        g = self.c.copy()
        if self.atom:
            g = g + self.atom * h
        if self.jumps:
            tot = np.zeros_like(h)
            for eta, w in zip(self.eta, self.wts):
                # I(x) = int_x^K eta exp(-eta (y - x)) h(y) dy
                beta = eta * self._weighted_cell(h, -eta * self.xs)
                alpha = np.exp(-eta * np.diff(self.xs))
                tot += w * _backward_linear(alpha, beta)
            g = g + self.b2 * tot
        beta = self._weighted_cell(g, self.Bk)
        return _backward_linear(self.cell_decay, beta)


def contraction_bound(rates: RateField, xs: np.ndarray) -> float:
    b1 = rates.evaluate(xs)[0]
    nodes, W = _cell_weights(xs)
    total = float(np.sum(W * b1[nodes]))
    return 1.0 - math.exp(-total)


def solve_picard(rates: RateField, query: DrawdownQuery, cfg: SolverConfig = SolverConfig(),
                 h0: Optional[float | np.ndarray] = None) -> HCurve:
    """Fixed-point iteration h <- L h, started from h0 (default 0)."""
    rates = _rates_with_s(rates, query)
    xs = _prepare(rates, query, cfg)
    op = _PicardOperator(rates, xs)
    h = np.zeros(len(xs)) if h0 is None else np.broadcast_to(np.asarray(h0, dtype=float), xs.shape).copy()
    prev_inc = None
    ratio = 0.0
    for it in range(1, cfg.picard_max_iter + 1):
        h_new = op.apply(h)
        if not np.all(np.isfinite(h_new)):
            raise NonFiniteRateError("Picard iterate is not finite")
        inc = float(np.max(np.abs(h_new - h)))
        if prev_inc is not None and prev_inc > 1e3 * cfg.picard_tol:
            ratio = max(ratio, inc / prev_inc)
        h, prev_inc = h_new, inc
        if inc <= cfg.picard_tol:
            break
    else:
        raise NonConvergenceError(
            f"Picard did not converge in {cfg.picard_max_iter} iterations (last increment {prev_inc:.3g})"
        )
    bound = 1.0 - math.exp(-float(op.Bk[0]))
    meta = _meta(rates, query, "picard", iterations=it, contraction_estimate=ratio, contraction_bound=bound)
    return HCurve(xs, h, meta)


def solve(rates: RateField, query: DrawdownQuery, cfg: SolverConfig = SolverConfig()):
    """Dispatch on ``cfg.method``; ``both`` returns a (backward, picard) pair."""
    if cfg.method == "backward_rk4":
        return solve_backward(rates, query, cfg)
    if cfg.method == "picard":
        return solve_picard(rates, query, cfg)
    return solve_backward(rates, query, cfg), solve_picard(rates, query, cfg)


# --- spectrally negative quadrature --------------------------------------

_GLX, _GLW = np.polynomial.legendre.leggauss(10)


def _gl_nodes(lo, hi):
    half = 0.5 * (hi - lo)
    return half[..., None] * (_GLX + 1.0) + lo[..., None], half[..., None] * _GLW


def solve_spectrally_negative(rates: RateField, query: DrawdownQuery,
                              cfg: SolverConfig = SolverConfig()) -> HCurve:
    """h(x) = int_x^K exp(-int_x^y b1) c(y) dy by nested Gauss-Legendre quadrature per cell."""
    rates = _rates_with_s(rates, query)
    xs = _prepare(rates, query, cfg)
    if not rates.spectrally_negative:
        b2 = rates.evaluate(xs)[1]
        if np.any(b2 != 0) or rates.atom0 != 0:
            raise PreconditionError("solve_spectrally_negative needs b2 identically zero")
    lo, hi = xs[:-1], xs[1:]
    # per-cell integral of b1
    yb, wb = _gl_nodes(lo, hi)
    cell_b1 = np.sum(np.asarray(rates.b1(yb.ravel())).reshape(yb.shape) * wb, axis=1)
    # outer nodes y in each cell, inner integral of b1 over [x_i, y]
    yo, wo = _gl_nodes(lo, hi)
    yi, wi = _gl_nodes(np.broadcast_to(lo[:, None], yo.shape), yo)
    inner = np.sum(np.asarray(rates.b1(yi.ravel())).reshape(yi.shape) * wi, axis=2)
    cvals = np.asarray(rates.c(yo.ravel())).reshape(yo.shape)
    if not (np.all(np.isfinite(inner)) and np.all(np.isfinite(cvals))):
        raise NonFiniteRateError("rates not finite on the quadrature nodes")
    beta = np.sum(np.exp(-inner) * cvals * wo, axis=1)
    hs = _backward_linear(np.exp(-cell_b1), beta)
    return HCurve(xs, hs, _meta(rates, query, "spectrally_negative"))


# --- Levy closed form and the rate inequality ------------------------------


def levy_joint_lt(b1: float, b2_amp: float, b2_lt: Callable[[float], float], c: float, delta: float) -> float:
    """E[exp(-q tau - s (Y - a) - delta M)] for a spatially homogeneous model started at 0."""
    den = delta + b1 - b2_amp * b2_lt(delta)
    if not den > 0:
        raise SingularError(f"denominator delta + b1 - b2(delta) = {den} is not positive")
    return c / den


@dataclass(frozen=True)
class RateViolation:
    x: float
    kind: str  # "negative" or "exceeds_b1"
    margin: float


@dataclass
class RateInequalityReport:
    checked: int = 0
    violations: list[RateViolation] = field(default_factory=list)
    min_margin: float = float("inf")

    @property
    def ok(self) -> bool:
        return not self.violations


def check_rate_inequality(rates: RateField, grid, s: Optional[float] = None,
                          rtol: float = 1e-9) -> RateInequalityReport:
    """Check 0 <= c + b2_amp + atom0 <= b1 at every grid point.

    At q = 0 the upper bound is attained (exit is certain), so a relative
    rounding allowance ``rtol * max(1, b1)`` is applied on both sides.
    """
    xs = np.atleast_1d(np.asarray(grid, dtype=float))
    rf = rates if s is None else rates.with_s(s)
    b1, b2, c = rf.evaluate(xs)
    mass = c + b2 + rf.atom0
    tol = rtol * np.maximum(1.0, np.abs(b1))
    rep = RateInequalityReport(checked=len(xs))
    upper = b1 - mass
    rep.min_margin = float(np.min(np.minimum(upper, mass))) if len(xs) else float("inf")
    for x, lo_m, up_m, t in zip(xs, mass, upper, tol):
        if lo_m < -t:
            rep.violations.append(RateViolation(float(x), "negative", float(lo_m)))
        if up_m < -t:
            rep.violations.append(RateViolation(float(x), "exceeds_b1", float(up_m)))
    return rep
