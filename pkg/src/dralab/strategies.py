"""Seller deviations.

Every strategy drives the message-level engine through the
``SellerStrategy`` hooks.  Strategies that apply to i.i.d. bidders also
expose ``fast(d, n, fine, values)``, a vectorised evaluation over a
``(trials, n)`` value matrix that must agree with the engine run by run.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .distributions import Distribution, EqualRevenue
from .errors import GridOverflow, SpecError, UnsortedBids
from .protocol import FineSchedule, SellerStrategy, parse_fine


@dataclass
class FastResult:
    net: np.ndarray
    gross: np.ndarray
    fines: np.ndarray
    conceal: np.ndarray
    big: np.ndarray          # some bidder clears their effective commitment
    honest: np.ndarray | None = None


def _top_bidder(bids: dict):
    if not bids:
        return None
    return max(bids, key=lambda j: (bids[j], -j))


def _view_price(ctx, bidder, inbox, bids, opened):
    price = ctx.reserve(bidder)
    for t in inbox:
        if t.handle in opened:
            m = ctx.value(t)
            if m is not None:
                price = max(price, m)
    return price


class Honest(SellerStrategy):
    name = "honest"

    def fast(self, d, n, fine, values):
        top, second = kernels.top_two(values)
        r = d.reserve()
        gross = np.where(top >= r, np.maximum(r, second), 0.0)
        zero = np.zeros_like(gross)
        return FastResult(gross, gross, zero, zero.astype(np.int64), top >= r)


class PrefixReveal(SellerStrategy):
    """Fake bids x_1 < ... < x_m forwarded to every target.

    The top real bidder sees every fake at or below their bid opened and
    the rest concealed; everyone else sees everything.  With ``ex_post``
    the seller opens everything whenever concealing would not net a
    positive amount.
    """

    def __init__(self, bids=(), targets=None, ex_post=True, name=None):
        bids = [float(x) for x in bids]
        if any(b >= c for b, c in zip(bids, bids[1:])):
            raise UnsortedBids("fake bids must be strictly increasing")
        if any(not math.isfinite(b) for b in bids):
            raise GridOverflow("fake bid outside the floating-point range")
        self.bids = bids
        self.targets = None if targets is None else set(targets)
        self.ex_post = ex_post
        self.name = name or ("prefix:" + ",".join(f"{b:g}" for b in bids) if bids else "honest")

    def grid(self, d, n, fine):
        return self.bids

    def _fakes(self, ctx):
        if "fakes" not in ctx.scratch:
            d = ctx.distributions[0]
            ctx.scratch["fakes"] = [ctx.fake(x) for x in self.grid(d, ctx.n, ctx.fine)]
        return ctx.scratch["fakes"]

    def forward(self, ctx, bidder, observed):
        out = super().forward(ctx, bidder, observed)
        if self.targets is None or bidder in self.targets:
            out += self._fakes(ctx)
        return out

    def reveal(self, ctx, bidder, inbox, bids):
        everything = {t.handle for t in inbox}
        if bidder != _top_bidder(bids):
            return everything
        v = bids[bidder]
        if v < ctx.reserve(bidder):
            return everything
        opened = {t.handle for t in inbox
                  if t.owner != "seller" or ctx.value(t) is not None and ctx.value(t) <= v}
        hidden = len(everything - opened)
        if hidden and self.ex_post:
            f = ctx.fine_for(bidder, len(inbox))
            if _view_price(ctx, bidder, inbox, bids, opened) - hidden * f <= 0:
                return everything
        return opened

    def fast(self, d, n, fine, values):
        if self.targets is not None:
            raise NotImplementedError("fast path needs fakes sent to every bidder")
        grid = np.asarray(self.grid(d, n, fine), dtype=float)
        f = fine(n + len(grid), d)
        top, second = kernels.top_two(values)
        net, gross, fines, conceal, big = kernels.prefix_grid(top, second, grid, f, d.reserve(),
                                                              self.ex_post)
        return FastResult(net, gross, fines, conceal, big)


def honest() -> SellerStrategy:
    return Honest()


def generic_prefix_reveal(bids, targets=None, ex_post=True) -> PrefixReveal:
    return PrefixReveal(bids, targets, ex_post)


def strawman_overshoot() -> PrefixReveal:
    """Always commit a fake 2; open it only if the bidder bid 2."""
    return PrefixReveal([2.0], ex_post=False, name="strawman")


class EqualRevenueGrid(PrefixReveal):
    """Fakes at n^(2i) * L for i = 1..n, L the fine for one of n+1 tuples."""

    def __init__(self, count: int, k: float | None = None):
        if count < 1:
            raise SpecError("ergrid needs at least one fake bid")
        super().__init__([], name=f"ergrid:{count}")
        self.count = count
        self.k = k

    def unit(self, d, fine):
        return float(self.k) if self.k is not None else fine(self.count + 1, d)

    def grid(self, d, n, fine):
        c = self.count
        L = self.unit(d, fine)
        try:
            out = [float(c) ** (2 * i) * L for i in range(1, c + 1)]
        except OverflowError:
            out = [math.inf]
        if not all(math.isfinite(x) for x in out):
            raise GridOverflow(f"ergrid:{c} exceeds the floating-point range")
        return out


def equal_revenue_grid(n: int, k: float | None = None) -> EqualRevenueGrid:
    return EqualRevenueGrid(n, k)


class AlphaTailAttack(SellerStrategy):
    """Bidder 1 is asked last.  If some other bid m exceeds ``threshold``,
    bidder 1 also receives a fake at m + k, concealed exactly when
    v_1 lies strictly between the threshold and m + k."""

    requires_malleable = False

    def __init__(self, threshold: float, k: float | None = None):
        self.threshold = float(threshold)
        self.k = k
        self.name = f"alphatail:{threshold:g}"

    def unit(self, d, n, fine):
        f = fine(n + 1, d)
        if self.k is not None and not math.isclose(self.k, f):
            raise SpecError("the probe offset must equal the fine bidder 1 is owed")
        return f

    def order(self, n):
        return list(range(2, n + 1)) + [1]

    def forward(self, ctx, bidder, observed):
        out = super().forward(ctx, bidder, observed)
        if bidder == 1:
            others = [b for j, b in observed.items() if j != 1]
            m = max(others) if others else -math.inf
            if m > self.threshold:
                b = m + self.unit(ctx.distributions[0], ctx.n, ctx.fine)
                ctx.scratch["probe"] = ctx.fake(b)
                out.append(ctx.scratch["probe"])
        return out

    def reveal(self, ctx, bidder, inbox, bids):
        everything = {t.handle for t in inbox}
        probe = ctx.scratch.get("probe")
        if bidder != 1 or probe is None:
            return everything
        v1, b = bids.get(1, -math.inf), ctx.value(probe)
        if self.threshold < v1 < b:
            return everything - {probe.handle}
        return everything

    def fast(self, d, n, fine, values):
        if n < 2:
            raise SpecError("alphatail needs at least two bidders")
        v1 = values[:, 0]
        m, m2 = kernels.top_two(values[:, 1:])
        attack, hon, fines, big = kernels.alpha_tail(v1, m, m2, self.threshold,
                                                     self.unit(d, n, fine), d.reserve())
        conceal = (fines > 0).astype(np.int64)
        return FastResult(attack, attack + fines, fines, conceal, big, hon)


def alpha_tail_attack(threshold: float, k: float | None = None) -> AlphaTailAttack:
    return AlphaTailAttack(threshold, k)


def malleable_grid_size(delta: float, alpha: float) -> tuple:
    """(z, Z): the real-valued grid length and its integer ceiling."""
    z = (1 - alpha) * math.log(1.0 / (alpha * delta * delta ** (alpha / (1 - alpha)))) \
        / math.log1p(delta) / alpha
    return z, max(1, math.ceil(z))


class MalleableGrid(SellerStrategy):
    """Geometric fake grid plus one extra tuple y*_i per bidder; real bids
    are never forwarded.

    ``variant="malleable"`` derives y*_i as the max of the other bids (needs
    the malleable ledger).  ``variant="truncated"`` commits y*_i = cap + 1,
    which no value from a distribution truncated at ``cap`` can reach.

    The top bidder sees every tuple at or below their bid opened and the
    rest concealed, whatever the fines; below the grid everything opens.
    ``ex_post=True`` instead opens everything whenever concealing would not
    net a positive amount.
    """

    def __init__(self, delta: float, alpha: float | None = None, n: int | None = None,
                 variant: str = "malleable", cap: float | None = None, ex_post: bool = False):
        if variant not in ("malleable", "truncated"):
            raise SpecError(f"unknown malleable-grid variant {variant!r}")
        if variant == "truncated" and cap is None:
            raise SpecError("truncated variant needs the cap")
        self.delta, self.alpha, self.n_hint = float(delta), alpha, n
        self.variant, self.cap, self.ex_post = variant, cap, ex_post
        self.requires_malleable = variant == "malleable"
        self.name = f"mallgrid:{delta:g}" + ("" if variant == "malleable" else ":trunc")

    def _alpha(self, d):
        a = self.alpha if self.alpha is not None else d.alpha_strong
        if a is None or not 0 < a < 1:
            raise SpecError("mallgrid needs alpha in (0, 1)")
        return a

    def grid(self, d, n):
        a = self._alpha(d)
        _, Z = malleable_grid_size(self.delta, a)
        scale = self.delta * (self.n_hint or n) ** (1 - a)
        return [scale * (1 + self.delta) ** l for l in range(Z + 1)]

    def fine_each(self, d, n, fine):
        return fine(len(self.grid(d, n)) + 2, d)

    def forward(self, ctx, bidder, observed):
        d = ctx.distributions[0]
        if "grid" not in ctx.scratch:
            ctx.scratch["grid"] = [ctx.fake(x) for x in self.grid(d, ctx.n)]
            ctx.scratch["grid_handles"] = {t.handle for t in ctx.scratch["grid"]}
        if self.variant == "malleable":
            others = [j for j in range(1, ctx.n + 1) if j != bidder]
            extra = ctx.derived(others, "max") if others else ctx.fake(-math.inf)
        else:
            extra = ctx.fake(self.cap + 1.0)
        return ctx.scratch["grid"] + [extra]

    def reveal(self, ctx, bidder, inbox, bids):
        everything = {t.handle for t in inbox}
        if bidder != _top_bidder(bids):
            return everything
        v = bids[bidder]
        if v < ctx.reserve(bidder):
            return everything
        grid = ctx.scratch["grid_handles"]
        if not self.ex_post and not any(t.handle in grid and ctx.value(t) <= v for t in inbox):
            return everything
        opened = {t.handle for t in inbox if ctx.value(t) <= v}
        hidden = len(everything - opened)
        if hidden and self.ex_post:
            f = ctx.fine_for(bidder, len(inbox))
            if _view_price(ctx, bidder, inbox, bids, opened) - hidden * f <= 0:
                return everything
        return opened

    def fast(self, d, n, fine, values):
        grid = np.asarray(self.grid(d, n))
        top, second = kernels.top_two(values)
        fixed = self.variant == "truncated"
        net, gross, fines, conceal, big = kernels.malleable_grid(
            top, second, grid, fixed, (self.cap + 1.0) if fixed else 0.0,
            self.fine_each(d, n, fine), d.reserve(), self.ex_post)
        return FastResult(net, gross, fines, conceal, big)


def malleable_grid_attack(delta, alpha=None, n=None, variant="malleable", cap=None,
                          ex_post=False):
    return MalleableGrid(delta, alpha, n, variant, cap, ex_post)


class TableStrategy(SellerStrategy):
    """Single-bidder deviation given as a lookup table: fixed fakes and,
    for each possible bid, the positions of the fakes to open."""

    def __init__(self, fakes, table: dict, before: bool = False):
        self.fakes = tuple(float(x) for x in fakes)
        self.table = {float(k): frozenset(v) for k, v in table.items()}
        self.before = before
        self.name = f"table:{self.fakes}:{sorted((k, sorted(v)) for k, v in self.table.items())}"

    def forward(self, ctx, bidder, observed):
        if "fakes" not in ctx.scratch:
            idx = (lambda p: -p) if self.before else (lambda p: None)
            ctx.scratch["fakes"] = [ctx.fake(x, index=idx(p)) for p, x in enumerate(self.fakes)]
        return super().forward(ctx, bidder, observed) + ctx.scratch["fakes"]

    def reveal(self, ctx, bidder, inbox, bids):
        keep = self.table.get(float(bids.get(bidder, math.nan)), frozenset(range(len(self.fakes))))
        fakes = ctx.scratch["fakes"]
        opened = {fakes[p].handle for p in keep}
        return {t.handle for t in inbox if t.owner != "seller" or t.handle in opened}


def enumerate_table_strategies(atoms=(1.0, 2.0), fake_values=(1.0, 1.5, 2.0, 3.0),
                               max_fakes: int = 2):
    """Every single-bidder table strategy over the given fake values."""
    for m in range(max_fakes + 1):
        for fakes in itertools.combinations_with_replacement(fake_values, m):
            subsets = [frozenset(s) for r in range(m + 1)
                       for s in itertools.combinations(range(m), r)]
            for before in ((False, True) if m else (False,)):
                for choice in itertools.product(subsets, repeat=len(atoms)):
                    yield TableStrategy(fakes, dict(zip(atoms, choice)), before)


def named_attacks(d: Distribution, n: int):
    """The constructions that apply to ``d`` with ``n`` bidders."""
    out = [honest()]
    if n == 1:
        out.append(strawman_overshoot() if d.discrete else PrefixReveal([2.0 * d.reserve()]))
    if isinstance(d, EqualRevenue) and n == 1:
        out.append(equal_revenue_grid(3))
    return out


def parse_strategy(spec: str, dist: Distribution | None = None,
                   n: int | None = None) -> SellerStrategy:
    """'honest', 'strawman', 'ergrid:<n>', 'alphatail:<T>', 'mallgrid:<delta>' or
    'prefix:<x1,...>'."""
    head, _, rest = spec.strip().partition(":")
    try:
        if head == "honest" and not rest:
            return honest()
        if head == "strawman" and not rest:
            return strawman_overshoot()
        if head == "ergrid":
            return equal_revenue_grid(int(rest))
        if head == "alphatail":
            return alpha_tail_attack(float(rest))
        if head == "mallgrid":
            return malleable_grid_attack(float(rest), n=n)
        if head == "prefix":
            return generic_prefix_reveal([float(x) for x in rest.split(",") if x.strip()])
    except (ValueError, UnsortedBids) as exc:
        raise SpecError(f"bad strategy spec {spec!r}: {exc}") from None
    raise SpecError(f"unknown strategy spec {spec!r}")


__all__ = [
    "FastResult", "Honest", "PrefixReveal", "EqualRevenueGrid", "AlphaTailAttack",
    "MalleableGrid", "TableStrategy", "FineSchedule", "parse_fine", "honest",
    "generic_prefix_reveal", "strawman_overshoot", "equal_revenue_grid", "alpha_tail_attack",
    "malleable_grid_attack", "malleable_grid_size", "enumerate_table_strategies",
    "named_attacks", "parse_strategy",
]
