# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode kernels; a line-by-line port of ``_fallback.py``."""

from libc.math cimport exp, log, log1p, sqrt, cos, INFINITY
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586

cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)

cdef inline uint64_t stream_key(uint64_t seed, uint64_t path, uint64_t stream) noexcept nogil:
    cdef uint64_t inner = mix64(seed + GOLDEN * (stream + 1))
    return mix64(inner + GOLDEN * (path + 1))

cdef inline double uniform(uint64_t key, uint64_t n) noexcept nogil:
    return <double>(mix64(key + GOLDEN * (n + 1)) >> 11) * INV_2_53

cdef inline double normal(uint64_t key, uint64_t n) noexcept nogil:
    cdef double u1 = 1.0 - uniform(key, 2 * n)
    cdef double u2 = uniform(key, 2 * n + 1)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)

cdef inline double expo(double u, double rate) noexcept nogil:
    return -log1p(-u) / rate


cdef int pemp_one(uint64_t seed, uint64_t path, double mu, double lam,
                  const double[::1] cum_w, const double[::1] rates, const double[::1] signs,
                  double x0, double a, double K, double t_max,
                  double* out_tau, double* out_M, double* out_Y) noexcept nogil:
    cdef uint64_t ke = stream_key(seed, path, 0)
    cdef uint64_t ce = 0
    cdef double X = x0, M = x0, t = 0.0, E, tK, u, size
    cdef Py_ssize_t j, ncomp = cum_w.shape[0]
    if x0 >= K:
        out_tau[0] = 0.0; out_M[0] = x0; out_Y[0] = 0.0
        return 1
    while True:
        E = expo(uniform(ke, ce), lam)
        ce += 1
        if X > 0.0:
            tK = log(K / X) / mu
        else:
            tK = INFINITY
        if tK <= E:
            if t + tK > t_max:
                X = X * exp(mu * (t_max - t))
                if X > M:
                    M = X
                out_tau[0] = t_max; out_M[0] = M; out_Y[0] = M - X
                return 2
            out_tau[0] = t + tK; out_M[0] = K; out_Y[0] = 0.0
            return 1
        if t + E > t_max:
            X = X * exp(mu * (t_max - t))
            if X > M:
                M = X
            out_tau[0] = t_max; out_M[0] = M; out_Y[0] = M - X
            return 2
        X = X * exp(mu * E)
        if X > M:
            M = X
        t = t + E
        u = uniform(ke, ce)
        ce += 1
        j = 0
        while j < ncomp - 1 and u >= cum_w[j]:
            j += 1
        size = expo(uniform(ke, ce), rates[j])
        ce += 1
        X = X + signs[j] * size
        if X > M:
            M = X
            if M > K:
                out_tau[0] = t; out_M[0] = M; out_Y[0] = 0.0
                return 1
        elif M - X > a:
            out_tau[0] = t; out_M[0] = M; out_Y[0] = M - X
            return 0


cdef inline int bridge_step(double x_old, double X, double sig, double h, double* M, double a,
                            double K, uint64_t km, uint64_t* cm) noexcept nogil:
    cdef double v = sig * sig * h
    cdef double L = M[0] - a
    cdef double d, m
    if X < L:
        return 0
    if v > 0.0:
        if exp(-2.0 * (x_old - L) * (X - L) / v) > uniform(km, cm[0]):
            cm[0] += 2
            return 0
        d = X - x_old
        m = 0.5 * (x_old + X + sqrt(d * d - 2.0 * v * log1p(-uniform(km, cm[0] + 1))))
    else:
        m = X if X > x_old else x_old
    cm[0] += 2
    if m > M[0]:
        M[0] = m
        if M[0] > K:
            return 1
    if M[0] - X > a:
        return 0
    return -1


cdef int euler_one(uint64_t seed, uint64_t path, double a0, double a1, double b0, double b1,
                   double lam, double eta, double dt, int64_t substeps,
                   double x0, double a, double K, double t_max, int bridge,
                   double* out_tau, double* out_M, double* out_Y) noexcept nogil:
    cdef uint64_t ke = stream_key(seed, path, 0)
    cdef uint64_t kg = stream_key(seed, path, 1)
    cdef uint64_t kb = stream_key(seed, path, 2)
    cdef uint64_t km = stream_key(seed, path, 3)
    cdef double hb = dt / substeps
    cdef double sq = sqrt(hb)
    cdef double X = x0, M = x0, Tj, Wk = 0.0, Wk1, tu = 0.0, Wu = 0.0, tk1, tl, Wl, span, WT
    cdef double x_old, sig
    cdef uint64_t ce = 0, jn = 0, cm = 0
    cdef int64_t k = 0
    cdef int code
    if lam > 0.0:
        Tj = expo(uniform(ke, ce), lam)
        ce += 1
    else:
        Tj = INFINITY
    while True:
        tk1 = (k + 1) * hb
        if tk1 > t_max:
            out_tau[0] = tu; out_M[0] = M; out_Y[0] = M - X
            return 2
        Wk1 = Wk + sq * normal(kg, <uint64_t>k)
        tl = k * hb
        Wl = Wk
        while Tj < tk1:
            span = tk1 - tl
            WT = Wl + (Tj - tl) / span * (Wk1 - Wl) + sqrt((Tj - tl) * (tk1 - Tj) / span) * normal(kb, jn)
            jn += 1
            x_old = X
            sig = b0 + b1 * X
            X = X + (a0 + a1 * X) * (Tj - tu) + sig * (WT - Wu)
            if bridge:
                code = bridge_step(x_old, X, sig, Tj - tu, &M, a, K, km, &cm)
                if code >= 0:
                    out_tau[0] = Tj; out_M[0] = M
                    out_Y[0] = a if code == 0 else M - X
                    return code
            elif X > M:
                M = X
                if M > K:
                    out_tau[0] = Tj; out_M[0] = M; out_Y[0] = 0.0
                    return 1
            elif M - X > a:
                out_tau[0] = Tj; out_M[0] = M; out_Y[0] = M - X
                return 0
            tu = Tj
            Wu = WT
            X = X + expo(uniform(ke, ce), eta)
            ce += 1
            if X > M:
                M = X
                if M > K:
                    out_tau[0] = tu; out_M[0] = M; out_Y[0] = 0.0
                    return 1
            tl = Tj
            Wl = WT
            Tj = Tj + expo(uniform(ke, ce), lam)
            ce += 1
        k += 1
        Wk = Wk1
        if k % substeps == 0:
            x_old = X
            sig = b0 + b1 * X
            X = X + (a0 + a1 * X) * (tk1 - tu) + sig * (Wk1 - Wu)
            if bridge:
                code = bridge_step(x_old, X, sig, tk1 - tu, &M, a, K, km, &cm)
                if code >= 0:
                    out_tau[0] = tk1; out_M[0] = M
                    out_Y[0] = a if code == 0 else M - X
                    return code
            elif X > M:
                M = X
                if M > K:
                    out_tau[0] = tk1; out_M[0] = M; out_Y[0] = 0.0
                    return 1
            elif M - X > a:
                out_tau[0] = tk1; out_M[0] = M; out_Y[0] = M - X
                return 0
            tu = tk1
            Wu = Wk1


def pemp_batch(uint64_t seed, int64_t path0, Py_ssize_t n, double mu, double lam,
               const double[::1] cum_w, const double[::1] rates, const double[::1] signs,
               double x0, double a, double K, double t_max,
               signed char[::1] code, double[::1] tau, double[::1] M, double[::1] Y):
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            code[i] = <signed char>pemp_one(seed, <uint64_t>(path0 + i), mu, lam, cum_w, rates, signs,
                                            x0, a, K, t_max, &tau[i], &M[i], &Y[i])


def euler_batch(uint64_t seed, int64_t path0, Py_ssize_t n, double a0, double a1, double b0, double b1,
                double lam, double eta, double dt, int64_t substeps,
                double x0, double a, double K, double t_max, int bridge,
                signed char[::1] code, double[::1] tau, double[::1] M, double[::1] Y):
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            code[i] = <signed char>euler_one(seed, <uint64_t>(path0 + i), a0, a1, b0, b1, lam, eta, dt,
                                             substeps, x0, a, K, t_max, bridge, &tau[i], &M[i], &Y[i])
