import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dralab.audit import (
    BLOCK, BandSampler, _merge, _moments, block_rng, combine, estimate_revenue, judge,
    prefix_exact, random_grids, run_blocks, theorem_mhr_check, ultra_grids,
)
from dralab.distributions import EqualRevenue, parse_dist
from dralab.errors import PreconditionViolated, SpecError
from dralab.strategies import generic_prefix_reveal


def test_judge_deterministic():
    assert judge("x", 1.0, 2.0).verdict == "pass"
    assert judge("x", 2.0, 1.0).verdict == "fail"
    assert judge("x", 2.0, 1.0, "ge").verdict == "pass"
    assert judge("x", 1.0, 1.0 + 1e-10, "eq", tolerance=1e-9).verdict == "pass"


def test_judge_sampled():
    r = judge("x", 1.02, 1.0, std_error=0.01)
    assert r.verdict == "pass" and r.tolerance == pytest.approx(0.03 + 1e-9)
    assert judge("x", 1.05, 1.0, std_error=0.01).verdict == "fail"


def test_judge_demonstrate():
    assert judge("x", 1.1, 1.0, "ge", 0.01, demonstrate=True).verdict == "pass"
    assert judge("x", 1.01, 1.0, "ge", 0.01, demonstrate=True).verdict == "inconclusive"
    assert judge("x", 0.9, 1.0, "ge", 0.01, demonstrate=True).verdict == "fail"


def test_combine():
    top = judge("a", 1.0, 2.0)
    out = combine("all", top, [judge("b", 1.01, 1.0, "ge", 0.01, demonstrate=True)])
    assert out.verdict == "inconclusive" and len(out.rows()) == 2
    out = combine("all", judge("a", 1.0, 2.0), [judge("c", 3.0, 2.0)])
    assert out.verdict == "fail"


@given(a=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
       b=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
def test_chan_merge(a, b):
    n, m, s, mx = _merge(_moments(a), _moments(b))
    allv = np.array(a + b)
    assert n == allv.size
    assert m == pytest.approx(allv.mean(), abs=1e-9)
    assert s == pytest.approx(((allv - allv.mean()) ** 2).sum(), rel=1e-7, abs=1e-6)
    assert mx == allv.max()


def test_block_streams_distinct():
    a = block_rng(1, 0).random(4)
    assert not np.array_equal(a, block_rng(1, 1).random(4))
    assert np.array_equal(a, block_rng(1, 0).random(4))


def test_run_blocks_worker_invariant():
    d = parse_dist("exp:1")
    fn = lambda v: {"x": v[:, 0]}
    draw = lambda rng, size: (d.sample(rng, (size, 1)).reshape(size, 1), None)
    t = 3 * BLOCK + 17
    assert run_blocks(fn, draw, t, 5, 1) == run_blocks(fn, draw, t, 5, 4)
    m, se, n, _ = run_blocks(fn, draw, t, 5)["x"]
    assert n == t and abs(m - 1.0) < 4 * se


def test_estimate_preconditions():
    with pytest.raises(PreconditionViolated):
        estimate_revenue("honest", "exp:1", 1, "mhr", 999)
    with pytest.raises(SpecError):
        estimate_revenue("honest", "exp:1", 1, "mhr", "exact")


def test_estimate_engine_agrees_with_fast():
    a = estimate_revenue("prefix:1.5,3", "exp:1", 2, "mhr", 2000, 3)
    b = estimate_revenue("prefix:1.5,3", "exp:1", 2, "mhr", 2000, 3, engine=True)
    assert a.mean == pytest.approx(b.mean, rel=1e-12)


def test_band_sampler_weights_unbiased():
    s = BandSampler([10.0, 100.0, 1000.0])
    v, w = s(np.random.default_rng(0), 400_000)
    assert np.mean(w) == pytest.approx(1.0, abs=0.01)
    # Pr[v >= 100] = 0.01 under the target
    assert np.mean(w * (v[:, 0] >= 100.0)) == pytest.approx(0.01, rel=0.03)


def test_band_sampler_rejects_bad_anchors():
    with pytest.raises(PreconditionViolated):
        BandSampler([3.0, 2.0])


def test_prefix_exact_matches_mc():
    d = EqualRevenue()
    grid = [3.0, 20.0, 150.0]
    net, gross, fines = prefix_exact(d, grid, 0.5)
    est = estimate_revenue(generic_prefix_reveal(grid), d, 1, "const:0.5", 200_000, 2)
    assert abs(est.mean - net) < 4 * est.std_error


def test_random_grids_reproducible():
    d = parse_dist("exp:1")
    a = [g.bids for g in random_grids(d, 5, 3)]
    assert a == [g.bids for g in random_grids(d, 5, 3)]
    assert all(b == sorted(b) for b in a)


def test_ultra_grids_finite():
    for g in ultra_grids(20, 1):
        assert all(math.isfinite(x) and x >= 1 for x in g.bids)


def test_exhaustive_two_point():
    rep = theorem_mhr_check("two", 1, fine="const:1")
    assert rep.verdict == "pass" and rep.lhs == 1.0
