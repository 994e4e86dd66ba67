import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dralab.distributions import (
    DiscreteTwoPoint, EqualRevenue, Exponential, PowerTailAlpha, UltraExponential, anchoring_point,
    discretize, hazard_lower_bound, myerson_revenue, parse_dist, pricing_bound_alpha, superlog,
    tail_bound_alpha, tetration,
)
from dralab.errors import InfiniteMean, PreconditionViolated, SpecError

CONTINUOUS = ["exp:1", "exp:2.5", "alpha:0.5", "alpha:0.9", "er"]


@pytest.mark.parametrize("spec", CONTINUOUS + ["two", "ultra", "trunc:alpha:0.5:50",
                                                "disc:exp:1:0.1"])
def test_spec_round_trip(spec):
    assert parse_dist(parse_dist(spec).spec).spec == parse_dist(spec).spec


@pytest.mark.parametrize("bad", ["", "gauss:1", "exp:x", "alpha:1.5", "exp:-1", "trunc:exp"])
def test_bad_specs(bad):
    with pytest.raises(SpecError):
        parse_dist(bad)


def test_reserves():
    assert Exponential(1).reserve() == 1.0
    assert Exponential(4).reserve() == 0.25
    assert PowerTailAlpha(0.5).reserve() == 1.0
    assert EqualRevenue().reserve() == 1.0
    assert DiscreteTwoPoint().reserve() == 1.0


def test_closed_forms():
    assert PowerTailAlpha(0.5).virtual_value(4.0) == 2.0
    assert EqualRevenue().virtual_value(7.0) == 0.0
    assert Exponential(1).virtual_value(3.0) == 2.0
    assert math.isinf(EqualRevenue().inverse_virtual_value(0.1))


def test_myerson_oracles():
    # independent closed forms: E[(M - 1)+] for M the max of n Exp(1) draws
    assert myerson_revenue(Exponential(1), 1).rev_n == pytest.approx(math.exp(-1), rel=1e-9)
    assert myerson_revenue(Exponential(1), 2).rev_n == pytest.approx(0.6680912407245783, rel=1e-8)
    assert myerson_revenue(Exponential(1), 3).rev_n == pytest.approx(0.9172310881153626, rel=1e-8)
    # second order statistic of two draws with tail v^-2: 4/3
    assert myerson_revenue(PowerTailAlpha(0.5), 2).rev_n == pytest.approx(4 / 3, rel=1e-8)
    assert myerson_revenue(DiscreteTwoPoint(), 1).rev_n == pytest.approx(1.0)
    assert myerson_revenue(EqualRevenue(), 1).rev_n == pytest.approx(1.0, rel=1e-6)


def test_myerson_routes_agree():
    d = Exponential(1)
    q = myerson_revenue(d, 2).rev_n
    mc = myerson_revenue(d, 2, method="monte_carlo", trials=200_000, seed=3)
    assert abs(mc.rev_n - q) < 4 * mc.std_error
    assert myerson_revenue(d, 1, method="closed_form").rev_single == pytest.approx(math.exp(-1))


def test_myerson_rejects_zero_bidders():
    with pytest.raises(PreconditionViolated):
        myerson_revenue(Exponential(1), 0)


@pytest.mark.parametrize("spec", CONTINUOUS)
@given(u=st.floats(1e-6, 1 - 1e-6))
def test_quantile_inverts_cdf(spec, u):
    d = parse_dist(spec)
    assert float(d.cdf(d.quantile(u))) == pytest.approx(u, abs=1e-9)


@pytest.mark.parametrize("spec", ["exp:1", "alpha:0.5", "alpha:0.9"])
@given(y=st.floats(0.0, 50.0))
def test_inverse_virtual_value(spec, y):
    d = parse_dist(spec)
    x = d.inverse_virtual_value(y)
    phi = float(d.virtual_value(x))
    assert phi >= y - 1e-7
    if x > d.support_lo:
        assert phi == pytest.approx(y, abs=1e-7)


@pytest.mark.parametrize("spec", ["exp:1", "alpha:0.5", "alpha:0.9", "er", "ultra"])
def test_regular(spec):
    parse_dist(spec).check_regular()


@given(a=st.floats(0.05, 0.95), x=st.floats(1.0, 1e4))
def test_power_tail_slope(a, x):
    d = PowerTailAlpha(a)
    assert float(d.virtual_value(x + 1.0)) - float(d.virtual_value(x)) >= a - 1e-12


@given(x=st.floats(1.0, 200.0))
def test_tail_bounds_dominate(x):
    d = PowerTailAlpha(0.5)
    tb = tail_bound_alpha(d, x)
    assert float(d.sf(x)) <= min(tb.power, tb.exponential) + 1e-12
    assert x * float(d.sf(x)) <= pricing_bound_alpha(d, x) + 1e-12


def test_tail_bound_oracle():
    # frozen: (1 / (0.1 * 3 + 0.9))^10 and exp(-2 / 1.2)
    tb = tail_bound_alpha(PowerTailAlpha(0.9), 3.0)
    assert tb.power == pytest.approx(0.16150558288984557, rel=1e-12)
    assert tb.exponential == pytest.approx(0.18887560283756187, rel=1e-12)


def test_tail_bound_preconditions():
    with pytest.raises(PreconditionViolated):
        tail_bound_alpha(PowerTailAlpha(0.5), 0.5)
    with pytest.raises(PreconditionViolated):
        hazard_lower_bound(Exponential(1), 2.0, 1.0)


@given(v=st.floats(1.0, 50.0), dv=st.floats(0.0, 50.0))
def test_hazard_lower_bound(v, dv):
    d = PowerTailAlpha(0.5)
    assert d.hazard_rate(v + dv) >= hazard_lower_bound(d, v, v + dv) * (1 - 1e-12)


def test_sampling_is_reproducible():
    d = Exponential(1)
    a = d.sample(np.random.default_rng(5), 100)
    b = d.sample(np.random.default_rng(5), 100)
    assert np.array_equal(a, b)


def test_infinite_mean():
    with pytest.raises(InfiniteMean):
        EqualRevenue().mean()
    with pytest.raises(InfiniteMean):
        UltraExponential().mean()
    assert Exponential(2).mean() == 0.5


@given(y=st.floats(-0.9, 3.4))
def test_superlog_inverts_tetration(y):
    assert superlog(tetration(y)) == pytest.approx(y, abs=1e-9)


def test_tetration_levels():
    assert tetration(0.0) == pytest.approx(1.0)
    assert tetration(1.0) == pytest.approx(math.e)
    assert tetration(2.0) == pytest.approx(math.e ** math.e)


@given(p=st.floats(1.0, 1e12))
def test_ultra_unit_revenue(p):
    assert p * UltraExponential().sf(p) <= 1.0 + 1e-9


def test_ultra_quantile_shapes():
    d = UltraExponential()
    u = np.random.default_rng(0).random((4, 3))
    q = d.quantile(u)
    assert q.shape == (4, 3)
    assert np.allclose(d.cdf(q.ravel()), u.ravel(), atol=1e-8)


def test_discretize():
    d = discretize(Exponential(1), 0.5)
    assert d.quantile(0.5) == 0.5  # ln 2 floors to 0.5
    assert d.mean() == pytest.approx(0.5 / math.expm1(0.5), rel=1e-6)


def test_discretized_power_tail_mean():
    # atoms at i/2 with Pr[X >= x] = x^-2: 1 + 2 (pi^2/6 - 1 - 1/4)
    d = discretize(PowerTailAlpha(0.5), 0.5)
    assert d.mean() == pytest.approx(1 + 2 * (math.pi ** 2 / 6 - 1.25), rel=1e-9)


def test_anchoring_point():
    beta = anchoring_point(Exponential(1), 4)
    assert beta > 0
    with pytest.raises(PreconditionViolated):
        anchoring_point(PowerTailAlpha(0.5), 2)
