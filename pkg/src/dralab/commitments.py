"""Commitment backends.

``setup``/``commit``/``verify`` implement a toy Pedersen scheme
g^m h^r mod p over a prime-order subgroup.  ``Ledger`` is the ideal
backend used by the protocol engine: handles are opaque, explicit handles
open only to the message they were created with, and (when malleability
is switched on) derived handles open to a function of their parents.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from sympy import isprime

from .errors import (BindingViolation, MalleabilityDisabled, OutOfRange, ParentsUnrevealed,
                     PrimeSearchFailed)

QUANTILE_BITS = 20
QUANTILE_GRID = 1 << QUANTILE_BITS
_MAX_TRIES = 200_000


@dataclass(frozen=True)
class GroupParams:
    modulus: int
    subgroup_order: int
    g: int
    h: int


@dataclass(frozen=True)
class Commitment:
    value: int
    backend: str = "pedersen"


@dataclass(frozen=True)
class Opening:
    message: object
    pad: int | None


def _hash_int(*parts) -> int:
    data = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def _random_prime(rng, bits):
    for _ in range(_MAX_TRIES):
        c = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if isprime(c):
            return c
    raise PrimeSearchFailed(f"no {bits}-bit prime found")


def _subgroup_element(p, q, seed_int):
    a = 2 + seed_int % (p - 3)
    return pow(a, (p - 1) // q, p)


def setup(seed: int, bit_size: int = 32, subgroup_bits: int | None = None) -> GroupParams:
    """Deterministic toy group: a ``bit_size``-bit prime p and a prime q | p-1.

    Without ``subgroup_bits`` p is a safe prime (q = (p-1)/2).  A small
    ``subgroup_bits`` gives a tiny subgroup suitable for exhaustive checks.
    """
    if not 16 <= bit_size <= 64:
        raise OutOfRange("bit_size must lie in [16, 64]")
    rng = random.Random(f"dralab-group:{seed}:{bit_size}:{subgroup_bits}")
    if subgroup_bits is None:
        for _ in range(_MAX_TRIES):
            q = _random_prime(rng, bit_size - 1)
            p = 2 * q + 1
            if isprime(p):
                break
        else:
            raise PrimeSearchFailed("no safe prime found")
    else:
        if not 2 <= subgroup_bits < bit_size:
            raise OutOfRange("subgroup_bits must be below bit_size")
        q = _random_prime(rng, subgroup_bits)
        lo, hi = (1 << (bit_size - 1)) // q + 1, ((1 << bit_size) - 1) // q
        for _ in range(_MAX_TRIES):
            m = rng.randint(lo, hi) & ~1
            p = m * q + 1
            if p.bit_length() == bit_size and isprime(p):
                break
        else:
            raise PrimeSearchFailed("no prime modulus found for the subgroup")

    counter = 0
    while True:
        g = _subgroup_element(p, q, rng.getrandbits(bit_size + 16))
        if g != 1:
            break
    while True:
        # h is hashed from the seed so nobody knows log_g h
        h = _subgroup_element(p, q, _hash_int("dralab-h", seed, bit_size, subgroup_bits, counter))
        counter += 1
        if h not in (1, g):
            break
    return GroupParams(p, q, g, h)


def commit(params: GroupParams, m: int, r: int) -> Commitment:
    q, p = params.subgroup_order, params.modulus
    if not (0 <= m < q and 0 <= r < q):
        raise OutOfRange("message and pad must be reduced mod q")
    return Commitment(pow(params.g, m, p) * pow(params.h, r, p) % p)


def verify(params: GroupParams, c: Commitment, m: int, r: int) -> bool:
    try:
        return commit(params, m, r).value == c.value
    except OutOfRange:
        return False


def encode_quantile(u: float) -> int:
    """Fixed-point quantile message on a 2^20 grid."""
    return min(QUANTILE_GRID - 1, max(0, int(u * QUANTILE_GRID)))


def decode_quantile(m: int) -> float:
    return (m + 0.5) / QUANTILE_GRID


# ---------------------------------------------------------------------------
# ideal ledger


def _apply(tag, msgs):
    if tag == "max":
        return max(msgs)
    if isinstance(tag, tuple) and tag[0] == "max_plus":
        return max(msgs) + tag[1]
    raise ValueError(f"unknown derive function {tag!r}")


@dataclass
class LedgerHandle:
    id: int
    origin: str
    actor: object
    parents: tuple = ()
    fn_tag: object = None
    revealed: bool = False


@dataclass
class Ledger:
    malleable: bool = False
    seed: int = 0
    handles: list = field(default_factory=list)
    _tied: dict = field(default_factory=dict)

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def commit(self, m, actor) -> LedgerHandle:
        h = LedgerHandle(len(self.handles), "explicit", actor)
        self.handles.append(h)
        self._tied[h.id] = Opening(m, self._rng.getrandbits(64))
        return h

    def derive(self, parents, fn_tag="max", actor="seller") -> LedgerHandle:
        if not self.malleable:
            raise MalleabilityDisabled("derived commitments need malleable mode")
        _apply(fn_tag, [0.0])
        ids = tuple(p.id if isinstance(p, LedgerHandle) else int(p) for p in parents)
        if not ids:
            raise ValueError("derive needs at least one parent")
        h = LedgerHandle(len(self.handles), "derived", actor, ids, fn_tag)
        self.handles.append(h)
        return h

    def _get(self, handle):
        return self.handles[handle.id if isinstance(handle, LedgerHandle) else int(handle)]

    def value(self, handle):
        """Message behind a handle, or None if a derived handle cannot materialise yet."""
        h = self._get(handle)
        if h.origin == "explicit":
            return self._tied[h.id].message
        if not all(self.handles[p].revealed for p in h.parents):
            return None
        return _apply(h.fn_tag, [self.value(p) for p in h.parents])

    def reveal(self, handle) -> Opening:
        h = self._get(handle)
        if h.origin == "derived":
            missing = [p for p in h.parents if not self.handles[p].revealed]
            if missing:
                raise ParentsUnrevealed(f"handle {h.id}: parents {missing} unrevealed")
            opening = Opening(self.value(h), None)
        else:
            opening = self._tied[h.id]
        h.revealed = True
        return opening

    def open(self, handle, message, pad=None) -> Opening:
        """Open an explicit handle to a claimed message; anything but the tied one fails."""
        h = self._get(handle)
        if h.origin != "explicit":
            return self.reveal(h) if message == self.value(h) else self._fail(h, message)
        tied = self._tied[h.id]
        if message != tied.message or (pad is not None and pad != tied.pad):
            self._fail(h, message)
        h.revealed = True
        return tied

    @staticmethod
    def _fail(h, message):
        raise BindingViolation(f"handle {h.id} cannot open to {message!r}")


def ledger_commit(ledger: Ledger, m, actor) -> LedgerHandle:
    return ledger.commit(m, actor)


def ledger_reveal(ledger: Ledger, handle) -> Opening:
    return ledger.reveal(handle)


def ledger_derive(ledger: Ledger, parents, fn_tag="max") -> LedgerHandle:
    return ledger.derive(parents, fn_tag)
