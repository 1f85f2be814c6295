"""Pure-Python episode kernels.

These are the reference implementation. ``_kernels.pyx`` repeats the same
floating-point operations in the same order, so both backends produce
bit-identical outcomes for a given seed.

Stop codes: 0 drawdown crossed, 1 maximum exceeded K, 2 truncated at t_max.
"""

from __future__ import annotations

import math

from .rng import STREAM_BRIDGE, STREAM_EVENTS, STREAM_GRID, STREAM_MONITOR, exponential, normal, stream_key, uniform

DRAWDOWN, MAX_EXCEEDED, TRUNCATED = 0, 1, 2


def pemp_episode(seed, path, mu, lam, cum_w, rates, signs, x0, a, K, t_max):
    """Exact event-driven episode of dX = mu X dt + dZ; returns (code, tau, M, Y)."""
    ke = stream_key(seed, path, STREAM_EVENTS)
    ce = 0
    X = x0
    M = x0
    t = 0.0
    if x0 >= K:
        return MAX_EXCEEDED, 0.0, x0, 0.0
    ncomp = len(cum_w)
    while True:
        E = exponential(uniform(ke, ce), lam)
        ce += 1
        tK = math.log(K / X) / mu if X > 0.0 else math.inf
        if tK <= E:
            if t + tK > t_max:
                X = X * math.exp(mu * (t_max - t))
                if X > M:
                    M = X
                return TRUNCATED, t_max, M, M - X
            return MAX_EXCEEDED, t + tK, K, 0.0
        if t + E > t_max:
            X = X * math.exp(mu * (t_max - t))
            if X > M:
                M = X
            return TRUNCATED, t_max, M, M - X
        X = X * math.exp(mu * E)
        if X > M:
            M = X
        t = t + E
        u = uniform(ke, ce)
        ce += 1
        j = 0
        while j < ncomp - 1 and u >= cum_w[j]:
            j += 1
        size = exponential(uniform(ke, ce), rates[j])
        ce += 1
        X = X + signs[j] * size
        if X > M:
            M = X
            if M > K:
                return MAX_EXCEEDED, t, M, 0.0
        elif M - X > a:
            return DRAWDOWN, t, M, M - X


def _bridge_step(x_old, X, sig, h, M, a, K, km, cm):
    """Continuous-time monitoring of one Euler sub-step via the Brownian bridge.

    Returns (code, M, cm) with code -1 when the episode continues.
    """
    v = sig * sig * h
    L = M - a
    if X < L:
        return DRAWDOWN, M, cm
    if v > 0.0:
        if math.exp(-2.0 * (x_old - L) * (X - L) / v) > uniform(km, cm):
            return DRAWDOWN, M, cm + 2
        d = X - x_old
        m = 0.5 * (x_old + X + math.sqrt(d * d - 2.0 * v * math.log1p(-uniform(km, cm + 1))))
    else:
        m = X if X > x_old else x_old
    cm += 2
    if m > M:
        M = m
        if M > K:
            return MAX_EXCEEDED, M, cm
    if M - X > a:
        return DRAWDOWN, M, cm
    return -1, M, cm


def euler_episode(seed, path, a0, a1, b0, b1, lam, eta, dt, substeps, x0, a, K, t_max, bridge=1):
    """Euler scheme for dX = (a0 + a1 X) dt + (b0 + b1 X) dW + dZ, Z with Exp(eta) up-jumps.

    Brownian increments live on a base grid of step dt / substeps; jumps occur
    at their exact times with the Brownian value there drawn from the bridge.
    With ``bridge`` set, barrier crossings between update points are detected
    through the conditional law of the Brownian bridge (the drawdown then
    creeps, so Y = a); otherwise only update points are inspected.
    """
    ke = stream_key(seed, path, STREAM_EVENTS)
    kg = stream_key(seed, path, STREAM_GRID)
    kb = stream_key(seed, path, STREAM_BRIDGE)
    km = stream_key(seed, path, STREAM_MONITOR)
    hb = dt / substeps
    sq = math.sqrt(hb)
    X = x0
    M = x0
    ce = 0
    cm = 0
    jn = 0
    if lam > 0.0:
        Tj = exponential(uniform(ke, ce), lam)
        ce += 1
    else:
        Tj = math.inf
    k = 0
    Wk = 0.0
    tu = 0.0
    Wu = 0.0
    while True:
        tk1 = (k + 1) * hb
        if tk1 > t_max:
            return TRUNCATED, tu, M, M - X
        Wk1 = Wk + sq * normal(kg, k)
        tl = k * hb
        Wl = Wk
        while Tj < tk1:
            span = tk1 - tl
            WT = Wl + (Tj - tl) / span * (Wk1 - Wl) + math.sqrt((Tj - tl) * (tk1 - Tj) / span) * normal(kb, jn)
            jn += 1
            x_old = X
            sig = b0 + b1 * X
            X = X + (a0 + a1 * X) * (Tj - tu) + sig * (WT - Wu)
            if bridge:
                code, M, cm = _bridge_step(x_old, X, sig, Tj - tu, M, a, K, km, cm)
                if code >= 0:
                    return code, Tj, M, (a if code == DRAWDOWN else M - X)
            elif X > M:
                M = X
                if M > K:
                    return MAX_EXCEEDED, Tj, M, 0.0
            elif M - X > a:
                return DRAWDOWN, Tj, M, M - X
            tu = Tj
            Wu = WT
            X = X + exponential(uniform(ke, ce), eta)
            ce += 1
            if X > M:
                M = X
                if M > K:
                    return MAX_EXCEEDED, tu, M, 0.0
            tl = Tj
            Wl = WT
            Tj = Tj + exponential(uniform(ke, ce), lam)
            ce += 1
        k += 1
        Wk = Wk1
        if k % substeps == 0:
            x_old = X
            sig = b0 + b1 * X
            X = X + (a0 + a1 * X) * (tk1 - tu) + sig * (Wk1 - Wu)
            if bridge:
                code, M, cm = _bridge_step(x_old, X, sig, tk1 - tu, M, a, K, km, cm)
                if code >= 0:
                    return code, tk1, M, (a if code == DRAWDOWN else M - X)
            elif X > M:
                M = X
                if M > K:
                    return MAX_EXCEEDED, tk1, M, 0.0
            elif M - X > a:
                return DRAWDOWN, tk1, M, M - X
            tu = tk1
            Wu = Wk1


def pemp_batch(seed, path0, n, mu, lam, cum_w, rates, signs, x0, a, K, t_max, code, tau, M, Y):
    cum_w, rates, signs = list(cum_w), list(rates), list(signs)
    for i in range(n):
        code[i], tau[i], M[i], Y[i] = pemp_episode(
            seed, path0 + i, mu, lam, cum_w, rates, signs, x0, a, K, t_max
        )


def euler_batch(seed, path0, n, a0, a1, b0, b1, lam, eta, dt, substeps, x0, a, K, t_max, bridge,
                code, tau, M, Y):
    for i in range(n):
        code[i], tau[i], M[i], Y[i] = euler_episode(
            seed, path0 + i, a0, a1, b0, b1, lam, eta, dt, substeps, x0, a, K, t_max, bridge
        )
