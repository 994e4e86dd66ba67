import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dralab.audit import exact_revenue, prefix_exact
from dralab.distributions import DiscreteTwoPoint, EqualRevenue, parse_dist
from dralab.errors import GridOverflow, SpecError, UnsortedBids
from dralab.protocol import conservation_error, parse_fine, run_dra, validate_safety
from dralab.strategies import (
    alpha_tail_attack, enumerate_table_strategies, equal_revenue_grid, generic_prefix_reveal,
    honest, malleable_grid_attack, malleable_grid_size, named_attacks, parse_strategy,
    strawman_overshoot,
)

TWO = DiscreteTwoPoint()

PARITY_CASES = [
    ("exp:1", 1, "mhr", honest(), False),
    ("exp:1", 3, "mhr", honest(), False),
    ("exp:1", 1, "mhr", generic_prefix_reveal([1.5, 2.5, 4.0]), False),
    ("exp:1", 3, "mhr", generic_prefix_reveal([1.5, 2.5, 4.0]), False),
    ("exp:1", 2, "const:0.1", generic_prefix_reveal([0.5, 1.5, 2.5, 4.0]), False),
    ("exp:1", 2, "const:0.1", generic_prefix_reveal([0.5, 1.5, 2.5], ex_post=False), False),
    ("er", 1, "const:1", equal_revenue_grid(3), False),
    ("alpha:0.5", 2, "mhr", alpha_tail_attack(4.0), False),
    ("alpha:0.5", 3, "mhr", alpha_tail_attack(4.0), False),
    ("alpha:0.5", 8, "mhr", malleable_grid_attack(0.25), True),
    ("alpha:0.5", 8, "mhr", malleable_grid_attack(0.25, ex_post=True), True),
    ("trunc:alpha:0.5:50", 8, "mhr", malleable_grid_attack(0.25, variant="truncated", cap=50),
     False),
    ("ultra", 1, "const:15.15426224147926", generic_prefix_reveal([2.0, 5.0, 40.0]), False),
]


@pytest.mark.parametrize("spec,n,fine,s,mall", PARITY_CASES, ids=lambda x: getattr(x, "name", x))
def test_engine_matches_fast_path(spec, n, fine, s, mall):
    d, f = parse_dist(spec), parse_fine(fine)
    vals = d.sample(np.random.default_rng(0), (300, n)).reshape(300, n)
    fr = s.fast(d, n, f, vals)
    for i in range(300):
        t, o = run_dra([d] * n, vals[i], f, s, malleable=mall)
        assert o.seller_net == pytest.approx(fr.net[i], rel=1e-9, abs=1e-9)
        assert o.fines_collected == pytest.approx(fr.fines[i], rel=1e-9, abs=1e-9)
        assert conservation_error(t, o) < 1e-9


def test_strawman_and_honest_exact():
    f = parse_fine("const:0")
    assert exact_revenue(strawman_overshoot(), TWO, 1, f)[0] == 1.5
    assert exact_revenue(honest(), TWO, 1, f)[0] == 1.0


def test_fine_one_caps_tables():
    f = parse_fine("const:1")
    tables = list(enumerate_table_strategies())
    assert len(tables) >= 300
    assert max(exact_revenue(s, TWO, 1, f)[0] for s in tables) == 1.0


def test_er_grid_exact():
    # hand formula: sum over bins [x_i, x_{i+1}) of x_i / x_i - x_i / x_{i+1}, less the fines
    d = EqualRevenue()
    xs = [100.0 ** i for i in range(1, 11)]
    gross = sum(1 - xs[i] / xs[i + 1] for i in range(9)) + 1
    fines = sum((9 - i) * (1 / xs[i] - 1 / xs[i + 1]) for i in range(9))
    assert equal_revenue_grid(10, 1.0).grid(d, 1, parse_fine("const:1")) == xs
    net, g, fi = prefix_exact(d, xs, 1.0)
    assert (net, g, fi) == pytest.approx((gross - fines, gross, fines), rel=1e-12)
    assert gross - fines == pytest.approx(9.82010101010101, rel=1e-12)


def test_unsorted_and_overflow():
    with pytest.raises(UnsortedBids):
        generic_prefix_reveal([3.0, 2.0])
    with pytest.raises(GridOverflow):
        equal_revenue_grid(200, 1.0).grid(EqualRevenue(), 1, parse_fine("const:1"))


def test_alpha_tail_offset_must_be_fine():
    d = parse_dist("alpha:0.5")
    with pytest.raises(SpecError):
        alpha_tail_attack(4.0, k=2.0).unit(d, 2, parse_fine("mhr"))


def test_alpha_tail_order():
    assert alpha_tail_attack(4.0).order(4) == [2, 3, 4, 1]


def test_malleable_grid_size():
    z, Z = malleable_grid_size(0.25, 0.5)
    # (1 - a) log(1 / (a d d^(a/(1-a)))) / log(1 + d) / a at a = 1/2, d = 1/4
    assert z == pytest.approx(math.log(32.0) / math.log(1.25), rel=1e-12)
    assert Z == math.ceil(z)


def test_malleable_inbox_size():
    d = parse_dist("alpha:0.5")
    s = malleable_grid_attack(0.5)
    t, o = run_dra([d] * 4, [2.0, 3.0, 4.0, 9.0], parse_fine("mhr"), s, malleable=True)
    Z = malleable_grid_size(0.5, 0.5)[1]
    assert t.n_i == [Z + 3] * 4
    assert all(tup.owner == "seller" for box in t.inbox for tup in box)


@pytest.mark.parametrize("spec", ["honest", "strawman", "ergrid:3", "alphatail:4",
                                  "mallgrid:0.25", "prefix:1,2,3"])
def test_parse_strategy(spec):
    assert parse_strategy(spec).name.split(":")[0] in spec


@pytest.mark.parametrize("bad", ["", "prefix:3,1", "ergrid:x", "bogus"])
def test_parse_strategy_errors(bad):
    with pytest.raises(SpecError):
        parse_strategy(bad)


@pytest.mark.parametrize("spec,n", [("two", 1), ("er", 1), ("exp:1", 2)])
def test_named_attacks_are_safe(spec, n):
    d = parse_dist(spec)
    rng = np.random.default_rng(1)
    for s in named_attacks(d, n):
        for _ in range(50):
            t, o = run_dra([d] * n, rng, parse_fine("const:1"), s)
            assert validate_safety(t, o).ok


@given(grid=st.lists(st.floats(0.2, 10.0), min_size=1, max_size=5, unique=True),
       seed=st.integers(0, 2**16))
def test_ex_post_never_loses_to_literal(grid, seed):
    d, f = parse_dist("exp:1"), parse_fine("mhr")
    vals = d.sample(np.random.default_rng(seed), (500, 2)).reshape(500, 2)
    a = generic_prefix_reveal(sorted(grid)).fast(d, 2, f, vals)
    b = generic_prefix_reveal(sorted(grid), ex_post=False).fast(d, 2, f, vals)
    assert np.all(a.net >= b.net - 1e-12)
    assert np.all(a.net >= 0)
