import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import integrate
from scipy.special import erfi

from ddlab.errors import DomainError, UnsupportedArgumentError
from ddlab.model import BrownianLevySpec, CramerLundbergSpec, DiffusionSpec, DrawdownQuery, RefractedSpec
from ddlab.snlp_exit import (
    NaturalScale,
    _coefficients,
    ScaleFunctionSet,
    diffusion_rate_array,
    diffusion_rate_field,
    diffusion_rates_q0,
    refracted_local_rates,
    refracted_rate_field,
    scale_W,
    scale_Z,
    snlp_joint_lt,
    snlp_local_rates,
    snlp_rate_field,
)

bm_specs = st.builds(BrownianLevySpec, st.floats(-1.5, 1.5), st.floats(0.3, 2.0))
cl_specs = st.builds(CramerLundbergSpec, st.floats(1.0, 3.0), st.floats(0.2, 2.0), st.floats(0.1, 0.8))
levy_specs = st.one_of(bm_specs, cl_specs)


def _laplace_of_W(spec, q, beta):
    f = lambda x: math.exp(-beta * x) * float(scale_W(spec, q, x))
    # the integrand decays like exp(-x) past the right root
    return integrate.quad(f, 0, 60.0, limit=400, epsabs=1e-13, epsrel=1e-11)[0]


# --- frozen values -----------------------------------------------------------


def test_bm_standard_scale_function_values():
    bm = BrownianLevySpec(0.0, 1.0)
    assert float(scale_W(bm, 0.0, 2.0)) == pytest.approx(4.0, abs=1e-14)
    assert float(scale_W(bm, 1.0, 0.0)) == 0.0
    # Z for standard BM is cosh(sqrt(2q) x)
    assert float(scale_Z(bm, 1.0, 1.0)) == pytest.approx(math.cosh(math.sqrt(2.0)), rel=1e-14)
    assert float(scale_W(bm, 1.0, 1.0)) == pytest.approx(math.sinh(math.sqrt(2.0)) * math.sqrt(2.0), rel=1e-14)


def test_cl_scale_function_starts_at_one_over_premium():
    cl = CramerLundbergSpec(2.0, 1.0, 0.5)
    assert float(scale_W(cl, 0.0, 0.0)) == pytest.approx(0.5, abs=1e-15)
    assert float(scale_W(cl, 0.7, 0.0)) == pytest.approx(0.5, abs=1e-15)


def test_bm_rates_unit_a():
    b1, c = snlp_local_rates(BrownianLevySpec(0.0, 1.0), 0.0, 0.0, 1.0)
    assert (b1, c) == pytest.approx((1.0, 1.0), abs=1e-14)
    q = DrawdownQuery(delta=1.0, a=1.0)
    assert snlp_joint_lt(BrownianLevySpec(0.0, 1.0), q) == pytest.approx(0.5, abs=1e-14)


def test_bm_rates_with_drift_match_gamblers_ruin():
    # P(M gains da before a drawdown of a) for BM(mu, sigma) gives b1 = 2mu/sigma^2 / (exp(2 mu a / sigma^2) - 1)
    mu, sig, a = 0.4, 1.3, 0.8
    k = 2 * mu / sig**2
    b1, c = snlp_local_rates(BrownianLevySpec(mu, sig), 0.0, 0.0, a)
    assert b1 == pytest.approx(k / math.expm1(k * a), rel=1e-13)
    assert c == b1


def test_cl_overshoot_transform_is_memoryless():
    # at q = 0 the undershoot past a is Exp(eta), so c(s) / c(0) = eta / (eta + s)
    cl = CramerLundbergSpec(1.0, 1.0, 0.5)
    _, c0 = snlp_local_rates(cl, 0.0, 0.0, 1.0)
    _, cs = snlp_local_rates(cl, 0.0, 1.0, 1.0)
    assert cs / c0 == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_bm_overshoot_transform_is_trivial():
    bm = BrownianLevySpec(0.2, 1.1)
    for q in (0.0, 0.5):
        assert snlp_local_rates(bm, q, 0.7, 1.0)[1] == pytest.approx(snlp_local_rates(bm, q, 0.0, 1.0)[1], rel=1e-12)


# --- properties --------------------------------------------------------------


@given(levy_specs, st.floats(0.0, 1.0), st.floats(0.0, 4.0), st.floats(0.01, 2.0))
def test_W_nondecreasing(spec, q, x, dx):
    assert float(scale_W(spec, q, x + dx)) >= float(scale_W(spec, q, x)) * (1 - 1e-13)


@given(levy_specs, st.floats(0.05, 1.0))
def test_W_laplace_transform(spec, q):
    sf = ScaleFunctionSet(spec)
    # beta beyond the right root of psi = q
    _, _, m, d = _coefficients(spec, q)
    beta = m + d + 1.0
    assume(beta < 12)
    expect = 1.0 / (spec.laplace_exponent(beta) - q)
    assert _laplace_of_W(spec, q, beta) == pytest.approx(expect, rel=1e-8)
    assert sf.W(q, 0.0) >= 0


@given(levy_specs, st.floats(0.01, 1.0), st.floats(0.0, 3.0))
def test_Z_is_one_plus_q_integral_of_W(spec, q, x):
    ref = 1.0 + q * integrate.quad(lambda y: float(scale_W(spec, q, y)), 0, x, epsabs=1e-13, epsrel=1e-12)[0]
    assert float(scale_Z(spec, q, x)) == pytest.approx(ref, rel=1e-10)


@given(levy_specs, st.floats(0.0, 1.0), st.floats(0.05, 3.0))
def test_W_prime_matches_finite_difference(spec, q, x):
    sf = ScaleFunctionSet(spec)
    h = 1e-6
    fd = (float(sf.W(q, x + h)) - float(sf.W(q, x - min(h, x / 2)))) / (h + min(h, x / 2))
    scale = max(1.0, float(sf.W(q, x)))
    assert float(sf.W_prime(q, x)) == pytest.approx(fd, rel=1e-5, abs=1e-8 * scale)


@given(levy_specs, st.floats(0.0, 1.0), st.floats(0.0, 1.5), st.floats(0.0, 3.0))
def test_tilt_identity(spec, q, s, x):
    p = q - spec.laplace_exponent(s)
    sf = ScaleFunctionSet(spec)
    lhs = float(sf.tilt(s).W(p, x))
    rhs = math.exp(-s * x) * float(sf.W(q, x))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


@given(levy_specs, st.floats(0.0, 1.0), st.floats(0.2, 3.0))
def test_tilt_zero_reproduces_rates(spec, q, a):
    b1, c0 = snlp_local_rates(spec, q, 0.0, a)
    _, c_tiny = snlp_local_rates(spec, q, 1e-9, a)
    assert c_tiny == pytest.approx(c0, rel=1e-6)


@given(levy_specs, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.2, 3.0))
def test_rate_inequality_levy(spec, q, s, a):
    b1, c = snlp_local_rates(spec, q, s, a)
    assert -1e-12 <= c <= b1 + 1e-10 * max(1.0, b1)


@pytest.mark.parametrize("spec", [BrownianLevySpec(-1.5, 0.3125), CramerLundbergSpec(1.0, 2.0, 0.8)])
@pytest.mark.parametrize("q,s,a", [(0.0, 0.5, 1.0), (0.3, 0.0, 2.0), (0.3, 1.2, 3.0), (0.05, 0.7, 2.9)])
def test_c_against_high_precision(spec, q, s, a):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 150  # Z W' and p W^2 cancel over ~80 digits for the steep cases
    sp = spec.tilted(s) if s else spec
    p = mp.mpf(q) - mp.mpf(spec.laplace_exponent(s))
    if isinstance(sp, BrownianLevySpec):
        mu, s2 = mp.mpf(sp.drift), mp.mpf(sp.volatility) ** 2
        d, m, A, B = mp.sqrt(mu**2 + 2 * p * s2) / s2, -mu / s2, 0, 2 / s2
    else:
        c, lam, eta = mp.mpf(sp.premium), mp.mpf(sp.claim_rate), 1 / mp.mpf(sp.claim_mean)
        bq = c * eta - p - lam
        d, m, A, B = mp.sqrt(bq**2 + 4 * c * p * eta) / (2 * c), -bq / (2 * c), 1 / c, (eta - bq / (2 * c)) / c
    W = lambda x: mp.e ** (m * x) * (A * mp.cosh(d * x) + B * mp.sinh(d * x) / d)
    ref = mp.e ** (s * a) * ((1 + p * mp.quad(W, [0, a])) * mp.diff(W, a) - p * W(a) ** 2) / W(a)
    assert snlp_local_rates(spec, q, s, a)[1] == pytest.approx(float(ref), rel=1e-11)


def test_scale_functions_reject_negative_x():
    with pytest.raises(DomainError):
        scale_W(BrownianLevySpec(0, 1), 0.0, -0.1)


def test_snlp_rate_field_is_constant():
    rf = snlp_rate_field(CramerLundbergSpec(1.0, 1.0, 0.5), 0.1, 0.0, 1.0)
    b1, b2, c = rf.evaluate(np.linspace(-3, 3, 7))
    assert np.ptp(b1) == 0 and np.ptp(c) == 0 and np.all(b2 == 0)
    assert rf.spectrally_negative


# --- refracted ---------------------------------------------------------------


@pytest.mark.parametrize("base", [BrownianLevySpec(0.3, 1.0), CramerLundbergSpec(2.0, 1.0, 0.5)])
def test_refracted_reduces_to_base_away_from_threshold(base):
    spec = RefractedSpec(base, 0.5, 0.0)
    a, q = 1.0, 0.2
    assert refracted_local_rates(spec, q, -0.5, a) == pytest.approx(snlp_local_rates(base, q, 0, a), rel=1e-13)
    assert refracted_local_rates(spec, q, 1.5, a) == pytest.approx(
        snlp_local_rates(base.with_drift_reduced(0.5), q, 0, a), rel=1e-13)


def test_refracted_bm_continuous_across_regimes():
    spec = RefractedSpec(BrownianLevySpec(0.3, 1.0), 0.5, 0.0)
    a, q, e = 1.0, 0.2, 1e-7
    for x in (0.0, a):
        lo = refracted_local_rates(spec, q, x - e, a)
        hi = refracted_local_rates(spec, q, x + e, a)
        assert lo == pytest.approx(hi, rel=1e-5)


def test_refracted_rate_inequality_and_field():
    spec = RefractedSpec(BrownianLevySpec(0.3, 1.0), 0.5, 0.0)
    rf = refracted_rate_field(spec, 0.2, 1.0)
    xs = np.linspace(-0.5, 1.5, 9)
    b1, _, c = rf.evaluate(xs)
    assert np.all(c >= 0) and np.all(c <= b1 * (1 + 1e-10))
    with pytest.raises(UnsupportedArgumentError):
        rf.c(0.3, 0.5)


# --- diffusions --------------------------------------------------------------


def test_ou_rate_closed_form():
    # kappa = sigma = 1: b1(0) = 1 / int_{-1}^0 exp(y^2) dy = 2 / (sqrt(pi) erfi(1))
    expect = 2.0 / (math.sqrt(math.pi) * erfi(1.0))
    b1, c = diffusion_rates_q0(DiffusionSpec.ou(1.0, 1.0), 0.0, 1.0)
    assert b1 == pytest.approx(expect, rel=1e-12)
    assert b1 == pytest.approx(0.6836897455585159, rel=1e-12)
    assert c == b1


def test_constant_diffusion_matches_bm_rates():
    mu, sig, a = 0.3, 1.4, 0.9
    ref = snlp_local_rates(BrownianLevySpec(mu, sig), 0.0, 0.0, a)[0]
    for x in (-2.0, 0.0, 3.0):
        assert diffusion_rates_q0(DiffusionSpec.constant(mu, sig), x, a)[0] == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("spec,xs", [
    (DiffusionSpec.ou(1.0, 1.0), np.linspace(-4, 6, 21)),
    (DiffusionSpec.ou(3.0, 0.5, 1.0), np.linspace(-1, 4, 21)),
    (DiffusionSpec.gbm(0.3, 0.4), np.linspace(1.05, 8, 21)),
])
def test_vectorized_diffusion_rates_match_scalar(spec, xs):
    vec = diffusion_rate_array(spec, xs, 1.0)
    ref = np.array([diffusion_rates_q0(spec, x, 1.0)[0] for x in xs])
    np.testing.assert_allclose(vec, ref, rtol=1e-12)


def test_natural_scale_ratio():
    spec = DiffusionSpec.ou(1.0, 1.0)
    S = NaturalScale(spec, 0.0)
    x, a = 0.7, 1.0
    ratio = float(S.S_prime(x)) / (S.S(x) - S.S(x - a))
    assert ratio == pytest.approx(diffusion_rates_q0(spec, x, a)[0], rel=1e-10)


def test_gbm_domain():
    rf = diffusion_rate_field(DiffusionSpec.gbm(0.1, 0.3), 1.0)
    with pytest.raises(DomainError):
        rf.b1(0.9)
    assert rf.b1(2.0) > 0
