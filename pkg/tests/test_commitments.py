import random

import pytest
from hypothesis import given, strategies as st

from dralab.commitments import (
    Ledger, commit, decode_quantile, encode_quantile, ledger_commit, ledger_derive, ledger_reveal,
    setup, verify,
)
from dralab.errors import BindingViolation, MalleabilityDisabled, OutOfRange, ParentsUnrevealed
from sympy import isprime


def test_setup_is_deterministic():
    assert setup(7) == setup(7)
    assert setup(7) != setup(8)


def test_safe_prime_group():
    p = setup(1, 32)
    assert p.modulus.bit_length() == 32
    assert isprime(p.modulus) and isprime(p.subgroup_order)
    assert p.modulus == 2 * p.subgroup_order + 1
    for x in (p.g, p.h):
        assert x != 1 and pow(x, p.subgroup_order, p.modulus) == 1


def test_small_subgroup():
    p = setup(3, 24, subgroup_bits=7)
    assert p.subgroup_order <= 127
    assert (p.modulus - 1) % p.subgroup_order == 0


def test_setup_rejects_sizes():
    with pytest.raises(OutOfRange):
        setup(0, 8)
    with pytest.raises(OutOfRange):
        setup(0, 32, subgroup_bits=40)


def test_commit_range():
    p = setup(2)
    with pytest.raises(OutOfRange):
        commit(p, p.subgroup_order, 0)
    assert not verify(p, commit(p, 1, 1), -1, 1)


@given(m=st.integers(0, 2**30), r=st.integers(0, 2**30))
def test_round_trip(m, r):
    p = setup(11)
    m, r = m % p.subgroup_order, r % p.subgroup_order
    c = commit(p, m, r)
    assert verify(p, c, m, r)
    assert not verify(p, c, (m + 1) % p.subgroup_order, r)


@given(u=st.floats(0.0, 1.0, exclude_max=True))
def test_quantile_encoding(u):
    m = encode_quantile(u)
    assert 0 <= m < 1 << 20
    assert abs(decode_quantile(m) - u) <= 2.0 ** -20


def test_ledger_binding():
    led = Ledger(seed=1)
    h = ledger_commit(led, 3.0, 1)
    with pytest.raises(BindingViolation):
        led.open(h, 4.0)
    assert led.open(h, 3.0).message == 3.0
    assert ledger_reveal(led, h).message == 3.0


def test_ledger_malleability_gate():
    led = Ledger()
    a = led.commit(2.0, 1)
    with pytest.raises(MalleabilityDisabled):
        ledger_derive(led, [a])


def test_derived_handles():
    led = Ledger(malleable=True)
    a, b = led.commit(2.0, 1), led.commit(5.0, 2)
    d = led.derive([a, b], ("max_plus", 1.0))
    assert led.value(d) is None
    with pytest.raises(ParentsUnrevealed):
        led.reveal(d)
    led.reveal(a)
    led.reveal(b)
    assert led.reveal(d).message == 6.0


def test_hiding_exhaustive_small_group():
    p = setup(5, 20, subgroup_bits=7)
    q = p.subgroup_order
    assert q <= 101
    everything = {pow(p.g, i, p.modulus) for i in range(q)}
    for m in range(q):
        reach = {commit(p, m, r).value for r in range(q)}
        assert reach == everything


def test_binding_probes():
    p = setup(9, 32)
    rng = random.Random(0)
    for _ in range(20_000):
        m, r = rng.randrange(p.subgroup_order), rng.randrange(p.subgroup_order)
        c = commit(p, m, r)
        m2 = (m + 1 + rng.randrange(p.subgroup_order - 1)) % p.subgroup_order
        assert not verify(p, c, m2, rng.randrange(p.subgroup_order))
