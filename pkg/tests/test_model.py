import math

import pytest
from hypothesis import given, strategies as st

from ddlab.errors import ValidationError
from ddlab.model import (
    BrownianLevySpec,
    CramerLundbergSpec,
    DiffusionSpec,
    DrawdownQuery,
    GenPempSpec,
    JumpComponent,
    PempSpec,
    RefractedSpec,
    jd_reference,
    pemp_reference,
    validate,
)


def test_reference_instances():
    pemp = pemp_reference()
    assert pemp.drift_coef == 1.0 and pemp.jump_rate == 3.0
    assert sorted((c.direction, c.rate) for c in pemp.jump_mix) == [("down", 1.0), ("down", 2.0), ("up", 1.0)]
    assert all(math.isclose(c.weight, 1 / 3) for c in pemp.jump_mix)
    assert pemp.is_reference_instance()
    jd = jd_reference()
    assert jd.drift_slope == 1.0 and jd.volatility == pytest.approx(math.sqrt(2.0))
    assert jd.jump_rate == 1.0 and jd.up_jump_rate == 1.0
    assert jd.is_reference_instance()
    assert not PempSpec(drift_coef=2.0).is_reference_instance()
    assert not GenPempSpec(volatility=1.0).is_reference_instance()


def test_pemp_jump_density_integrates_to_one():
    from scipy import integrate

    spec = PempSpec()
    lo = integrate.quad(lambda w: float(spec.jump_density(w)), -60, 0)[0]
    hi = integrate.quad(lambda w: float(spec.jump_density(w)), 0, 60)[0]
    assert lo + hi == pytest.approx(1.0, abs=1e-10)
    assert hi == pytest.approx(1 / 3, abs=1e-10)


@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_bm_laplace_exponent_vanishes_at_zero(mu, sigma):
    assert BrownianLevySpec(mu, sigma).laplace_exponent(0.0) == 0.0


@given(st.floats(0.5, 3), st.floats(0.1, 3), st.floats(0.1, 2))
def test_cl_laplace_exponent_vanishes_at_zero(c, lam, mean):
    assert CramerLundbergSpec(c, lam, mean).laplace_exponent(0.0) == pytest.approx(0.0, abs=1e-14)


@given(st.floats(-2, 2), st.floats(0.2, 2), st.floats(0, 2), st.floats(0, 3))
def test_bm_tilt_shifts_exponent(mu, sigma, s, beta):
    spec = BrownianLevySpec(mu, sigma)
    lhs = spec.tilted(s).laplace_exponent(beta)
    rhs = spec.laplace_exponent(beta + s) - spec.laplace_exponent(s)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.floats(0.5, 3), st.floats(0.1, 3), st.floats(0.1, 2), st.floats(0, 2), st.floats(0, 3))
def test_cl_tilt_shifts_exponent(c, lam, mean, s, beta):
    spec = CramerLundbergSpec(c, lam, mean)
    lhs = spec.tilted(s).laplace_exponent(beta)
    rhs = spec.laplace_exponent(beta + s) - spec.laplace_exponent(s)
    assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-11)


def test_tilt_zero_is_identity():
    assert BrownianLevySpec(0.3, 1.2).tilted(0.0) == BrownianLevySpec(0.3, 1.2)
    cl = CramerLundbergSpec(1.0, 2.0, 0.25)
    t = cl.tilted(0.0)
    assert (t.premium, t.claim_rate, t.claim_mean) == pytest.approx((1.0, 2.0, 0.25))


def test_validation_messages_name_constraints():
    rep = validate(PempSpec(), DrawdownQuery(a=1.0, x0=0.5, K=20))
    assert "x0 ≥ a" in rep.names()
    with pytest.raises(ValidationError, match="x0 ≥ a"):
        rep.raise_if_failed()
    rep = validate(BrownianLevySpec(0.0, 0.0))
    assert "volatility > 0" in rep.names()
    rep = validate(PempSpec(jump_mix=(JumpComponent(0.5, 1.0, "up"), JumpComponent(0.4, 1.0, "down"))))
    assert "weights sum to 1" in rep.names()
    rep = validate(BrownianLevySpec(0, 1), DrawdownQuery(q=-1, a=0, x0=3, K=2))
    assert {"q ≥ 0", "a > 0", "x0 ≤ K"} <= set(rep.names())
    rep = validate(RefractedSpec(CramerLundbergSpec(1.0, 1.0, 0.5), 1.5, 0.0))
    assert "premium - refraction > 0" in rep.names()
    rep = validate(DiffusionSpec.gbm(0.1, 0.2), DrawdownQuery(a=1, x0=0.5, K=3))
    assert "x0 - a > 0" in rep.names()
    assert validate(DiffusionSpec("cubic", {})).names() == ["known diffusion family"]


def test_valid_reference_queries_pass():
    assert validate(PempSpec(), DrawdownQuery(a=1, x0=2, K=20)).ok
    assert validate(GenPempSpec(), DrawdownQuery(a=1, x0=0, K=6)).ok
    assert validate(DiffusionSpec.ou(1, 1), DrawdownQuery(a=1, x0=0, K=3)).ok


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_ou_drift_ratio_integral_is_additive(x, y, z):
    spec = DiffusionSpec.ou(1.3, 0.7, 0.2)
    total = spec.drift_ratio_integral(x, z)
    split = spec.drift_ratio_integral(x, y) + spec.drift_ratio_integral(y, z)
    assert float(total) == pytest.approx(float(split), abs=1e-9)


def test_drift_ratio_integral_matches_quadrature():
    from scipy import integrate

    for spec, lo, hi in [(DiffusionSpec.ou(1.0, 1.0), -1.0, 0.5), (DiffusionSpec.gbm(0.3, 0.4), 0.5, 2.0),
                         (DiffusionSpec.constant(0.7, 1.5), -1.0, 1.0)]:
        ref = integrate.quad(lambda y: 2 * float(spec.drift_fn(y)) / float(spec.vol_fn(y)) ** 2, lo, hi)[0]
        assert float(spec.drift_ratio_integral(lo, hi)) == pytest.approx(ref, rel=1e-12)


def test_specs_are_hashable_and_frozen():
    specs = {PempSpec(), GenPempSpec(), BrownianLevySpec(0, 1), DiffusionSpec.ou(1, 1)}
    assert len(specs) == 4
    with pytest.raises(Exception):
        PempSpec().jump_rate = 1.0
