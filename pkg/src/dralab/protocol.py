"""Message-level engine for the deferred-revelation auction and the
second-price auction with commitments.

A run proceeds in two rounds.  Every bidder commits; the seller then
asks bidders to reveal one at a time, and before each request forwards
a list of tuples (commitment, declared distribution, declared index) to
that bidder.  Forwarding may depend only on bids revealed earlier.  After
all requests, the seller decides per bidder which forwarded tuples to open.
Each bidder resolves the auction on their own view; money moves only
according to the winner's view (plus fines owed to a bidder who is the
top revealed tuple in their own view).

Bidders are identified 1..n.  A real bidder's declared index is its id;
seller identities take indices supplied by the strategy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .commitments import Ledger
from .distributions import Distribution, _num, parse_dist
from .errors import CountViolation, PreconditionViolated, SpecError, UnsafeStrategy

SELLER = "seller"
BURN = "burn"


# ---------------------------------------------------------------------------
# fines


@dataclass(frozen=True)
class FineSchedule:
    kind: str
    alpha: float | None = None
    eps: float | None = None
    k: float | None = None

    KINDS = ("mhr_reserve", "alpha", "alpha_single", "bounded", "constant", "spc_fee")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise SpecError(f"unknown fine kind {self.kind!r}")
        if self.kind in ("alpha", "alpha_single") and not 0 < (self.alpha or 0) < 1:
            raise SpecError("alpha fine needs alpha in (0, 1)")
        if self.kind == "alpha" and not (self.eps or 0) > 0:
            raise SpecError("alpha fine needs eps > 0")
        if self.kind in ("constant", "spc_fee") and (self.k is None or self.k < 0):
            raise SpecError("constant fine needs k >= 0")

    def __call__(self, n: int, d: Distribution) -> float:
        if self.kind in ("constant", "spc_fee"):
            return float(self.k)
        if self.kind == "bounded":
            if not math.isfinite(d.support_hi):
                raise PreconditionViolated(f"{d.spec} is unbounded")
            return float(d.support_hi) + 1.0
        r = d.reserve()
        if self.kind == "mhr_reserve":
            return r
        a = self.alpha
        if self.kind == "alpha":
            return ((2.0 * n * n / (self.eps * a)) ** ((1 - a) / a)
                    * (1 - a) ** (-1.0 / a) * r)
        return r * ((1.0 / (1 - a)) ** (1.0 / (1 - a)) * (1.0 / a)) ** ((1 - a) / a)

    @property
    def spec(self) -> str:
        return {
            "mhr_reserve": lambda: "mhr",
            "alpha": lambda: f"alpha:{_num(self.alpha)}:{_num(self.eps)}",
            "alpha_single": lambda: f"alpha1:{_num(self.alpha)}",
            "bounded": lambda: "bounded",
            "constant": lambda: f"const:{_num(self.k)}",
            "spc_fee": lambda: f"spcfee:{_num(self.k)}",
        }[self.kind]()


def parse_fine(spec: str) -> FineSchedule:
    head, _, rest = spec.strip().partition(":")
    try:
        if head == "mhr" and not rest:
            return FineSchedule("mhr_reserve")
        if head == "bounded" and not rest:
            return FineSchedule("bounded")
        if head == "const":
            return FineSchedule("constant", k=float(rest))
        if head == "spcfee":
            return FineSchedule("spc_fee", k=float(rest))
        if head == "alpha1":
            return FineSchedule("alpha_single", alpha=float(rest))
        if head == "alpha":
            a, _, e = rest.partition(":")
            return FineSchedule("alpha", alpha=float(a), eps=float(e))
    except ValueError:
        pass
    raise SpecError(f"bad fine spec {spec!r}")


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class ForwardTuple:
    handle: int
    declared: Distribution
    declared_index: int
    owner: object  # bidder id or SELLER


@dataclass
class Transcript:
    mechanism: str
    distributions: list
    values: list
    bids: list
    own_handles: list
    inbox: list            # inbox[i-1]: tuples forwarded to bidder i
    reveals: list          # reveals[i-1][handle] -> bool
    messages: dict         # handle -> value (None if it never materialised)
    bidder_revealed: list
    order: list
    malleable: bool = False

    @property
    def n(self):
        return len(self.values)

    @property
    def n_i(self):
        return [len(box) + 1 for box in self.inbox]

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "values": [float(v) for v in self.values],
            "bids": [float(b) for b in self.bids],
            "n_i": self.n_i,
            "inbox": [[{"handle": t.handle, "dist": t.declared.spec, "index": t.declared_index,
                        "owner": t.owner} for t in box] for box in self.inbox],
            "reveals": [[bool(self.reveals[i][t.handle]) for t in box]
                        for i, box in enumerate(self.inbox)],
        }


@dataclass
class BidderView:
    bidder: int
    top_index: int | None       # declared index of i* in this view
    top_owner: object
    wins: bool
    price: float
    concealed: int
    fine_each: float


@dataclass
class Outcome:
    winner: int | None
    price: float
    fines_collected: float
    seller_net: float
    views: list
    transfers: list = field(default_factory=list)  # (payer, payee, amount, kind)

    def balances(self) -> dict:
        bal: dict = {}
        for payer, payee, amount, _ in self.transfers:
            bal[payer] = bal.get(payer, 0.0) - amount
            bal[payee] = bal.get(payee, 0.0) + amount
        return bal


# ---------------------------------------------------------------------------
# seller interface


class RunContext:
    """What a seller strategy may touch during one run."""

    def __init__(self, ledger, distributions, fine, mechanism, spc_reserve=0.0):
        self.ledger = ledger
        self.spc_reserve = spc_reserve
        self.distributions = distributions
        self.fine = fine
        self.mechanism = mechanism
        self.n = len(distributions)
        self.real_handles = {}
        self._next_index = self.n + 1
        self.scratch = {}

    def reserve(self, bidder) -> float:
        if self.mechanism == "spc":
            return self.spc_reserve
        return self.distributions[bidder - 1].reserve()

    def fine_for(self, bidder, inbox_size) -> float:
        return self.fine(self.n if self.mechanism == "spc" else inbox_size + 1,
                         self.distributions[bidder - 1])

    def real_tuple(self, j) -> ForwardTuple:
        return ForwardTuple(self.real_handles[j], self.distributions[j - 1], j, j)

    def fresh_index(self) -> int:
        i = self._next_index
        self._next_index += 1
        return i

    def fake(self, value, declared=None, index=None) -> ForwardTuple:
        h = self.ledger.commit(float(value), SELLER)
        return ForwardTuple(h.id, declared or self.distributions[0],
                            self.fresh_index() if index is None else index, SELLER)

    def derived(self, parents, fn_tag="max", declared=None, index=None) -> ForwardTuple:
        h = self.ledger.derive([self.real_handles[j] for j in parents], fn_tag)
        return ForwardTuple(h.id, declared or self.distributions[0],
                            self.fresh_index() if index is None else index, SELLER)

    def value(self, t: ForwardTuple):
        return self.ledger.value(t.handle)


class SellerStrategy:
    """Honest execution; subclasses override the hooks."""

    name = "honest"
    requires_malleable = False

    def order(self, n):
        return list(range(1, n + 1))

    def forward(self, ctx: RunContext, bidder: int, observed: dict) -> list:
        return [ctx.real_tuple(j) for j in range(1, ctx.n + 1) if j != bidder]

    def reveal(self, ctx: RunContext, bidder: int, inbox: list, bids: dict) -> set:
        return {t.handle for t in inbox}

    def select_winner(self, views: list) -> int | None:
        claim = [v for v in views if v.wins]
        if not claim:
            return None
        return max(claim, key=lambda v: (v.price - v.concealed * v.fine_each, -v.bidder)).bidder

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


# ---------------------------------------------------------------------------
# resolution helpers


def effective_bid(own: Distribution, declared: Distribution, b: float) -> float:
    """beta_ij: bid b under ``declared`` mapped into the ``own`` value scale."""
    if declared == own:
        return float(b)
    return own.inverse_virtual_value(declared.virtual_value(b))


class _Cache:
    def __init__(self):
        self.reserve = {}
        self.fine = {}

    def r(self, d):
        if d not in self.reserve:
            self.reserve[d] = d.reserve()
        return self.reserve[d]


def _resolve_view(i, t: Transcript, fine, cache, mechanism, spc_reserve):
    d_i = t.distributions[i - 1]
    b_i = t.bids[i - 1]
    box = t.inbox[i - 1]
    shown = t.reveals[i - 1]
    entries = []
    if t.bidder_revealed[i - 1]:
        entries.append((b_i, -i, i))
    concealed = 0
    for tup in box:
        if shown[tup.handle]:
            b = t.messages[tup.handle]
            eff = b if mechanism == "spc" else effective_bid(d_i, tup.declared, b)
            entries.append((eff, -tup.declared_index, tup.owner))
        else:
            concealed += 1
    if mechanism == "spc":
        reserve, fine_each = spc_reserve, fine(t.n, d_i)
    else:
        reserve = cache.r(d_i)
        key = (len(box) + 1, d_i)
        if key not in cache.fine:
            cache.fine[key] = fine(len(box) + 1, d_i)
        fine_each = cache.fine[key]
    if not entries:
        return BidderView(i, None, None, False, 0.0, concealed, fine_each)
    top = max(entries, key=lambda e: (e[0], e[1]))
    is_self = top[2] == i and top[1] == -i
    wins = is_self and b_i >= reserve
    price = 0.0
    if wins:
        others = [e[0] for e in entries if not (e[2] == i and e[1] == -i)]
        price = max([reserve] + others)
    return BidderView(i, -top[1], top[2], wins, float(price), concealed, fine_each)


def _run(mechanism, distributions, values, fine, seller, *, malleable=False, bids=None,
         bidder_reveals=None, spc_reserve=0.0, check=True, ledger_seed=0):
    n = len(distributions)
    if isinstance(values, np.random.Generator):
        values = [float(d.sample(values)) for d in distributions]
    values = [float(v) for v in values]
    if len(values) != n:
        raise ValueError("one value per bidder")
    bids = values if bids is None else [float(b) for b in bids]
    bidder_reveals = [True] * n if bidder_reveals is None else list(bidder_reveals)
    seller = seller or SellerStrategy()
    if seller.requires_malleable and not malleable:
        from .errors import MalleabilityDisabled
        raise MalleabilityDisabled(f"{seller.name} needs malleable commitments")

    ledger = Ledger(malleable=malleable, seed=ledger_seed)
    ctx = RunContext(ledger, list(distributions), fine, mechanism, spc_reserve)
    own = []
    for i in range(1, n + 1):
        h = ledger.commit(bids[i - 1], i)
        ctx.real_handles[i] = h.id
        own.append(h.id)

    order = list(seller.order(n))
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError("reveal order must be a permutation of the bidders")
    inbox = [None] * n
    observed = {}
    for i in order:
        box = list(seller.forward(ctx, i, dict(observed)))
        idx = [tup.declared_index for tup in box]
        if len(set(idx)) != len(idx) or i in idx:
            raise UnsafeStrategy(f"duplicate declared index in bidder {i}'s inbox")
        inbox[i - 1] = box
        if bidder_reveals[i - 1]:
            ledger.reveal(own[i - 1])
            observed[i] = bids[i - 1]

    reveals = []
    for i in range(1, n + 1):
        opened = set(seller.reveal(ctx, i, inbox[i - 1], dict(observed)))
        rec = {}
        for tup in inbox[i - 1]:
            want = tup.handle in opened
            if want and tup.owner != SELLER and not bidder_reveals[tup.owner - 1]:
                want = False  # no opening exists for a bidder who aborted
            if want:
                ledger.reveal(tup.handle)
            rec[tup.handle] = want
        reveals.append(rec)

    messages = {h.id: ledger.value(h) for h in ledger.handles}
    t = Transcript(mechanism, list(distributions), values, bids, own, inbox, reveals, messages,
                   bidder_reveals, order, malleable)
    cache = _Cache()
    views = [_resolve_view(i, t, fine, cache, mechanism, spc_reserve) for i in range(1, n + 1)]
    winner = seller.select_winner(views)
    o = _settle(t, views, winner, mechanism, fine)
    if check:
        report = validate_safety(t, o)
        if not report.ok:
            raise UnsafeStrategy(report)
    return t, o


def _payer(t, tup):
    if tup.owner == SELLER or t.bidder_revealed[tup.owner - 1]:
        return SELLER
    return f"bidder:{tup.owner}"


def _settle(t, views, winner, mechanism, fine):
    transfers = []
    price = 0.0
    fines_collected = 0.0
    if mechanism == "spc":
        k = fine(t.n, t.distributions[0])
        for i in range(1, t.n + 1):
            transfers.append((f"bidder:{i}", "escrow", k, "deposit"))
            if t.bidder_revealed[i - 1]:
                transfers.append(("escrow", f"bidder:{i}", k, "refund"))
    if winner is not None:
        w = views[winner - 1]
        price = w.price
        transfers.append((f"bidder:{winner}", SELLER, price, "price"))
    for v in views:
        # fines go to whoever tops their own view, allocated or not
        if v.top_owner != v.bidder or v.top_index != v.bidder:
            continue
        payee = f"bidder:{v.bidder}"
        for tup in t.inbox[v.bidder - 1]:
            if t.reveals[v.bidder - 1][tup.handle]:
                continue
            payer = _payer(t, tup)
            if mechanism == "spc" and payer != SELLER:
                payer = "escrow"  # the aborted bidder's deposit
            transfers.append((payer, payee, v.fine_each, "fine"))
            if v.bidder == winner:
                fines_collected += v.fine_each
    if mechanism == "spc":
        # deposits of aborted bidders that no winner claims are burned
        held = sum(a for p, q, a, _ in transfers if q == "escrow") - \
            sum(a for p, q, a, _ in transfers if p == "escrow")
        if held > 0:
            transfers.append(("escrow", BURN, held, "burn"))
    seller_net = sum(a for p, q, a, _ in transfers if q == SELLER) - \
        sum(a for p, q, a, _ in transfers if p == SELLER)
    return Outcome(winner, float(price), float(fines_collected), float(seller_net), views,
                   transfers)


def run_dra(distributions, values, fine: FineSchedule, seller: SellerStrategy | None = None,
            **kw):
    """One DRA(f) run.  ``values`` may be a sequence or a numpy Generator."""
    return _run("dra", distributions, values, fine, seller, **kw)


def run_spc(distribution: Distribution, n: int, fee: float, values,
            seller: SellerStrategy | None = None, reserve: float = 0.0, **kw):
    """One run of the second-price auction with commitment fee ``fee``."""
    return _run("spc", [distribution] * n, values, FineSchedule("spc_fee", k=fee), seller,
                spc_reserve=reserve, **kw)


# ---------------------------------------------------------------------------
# analysis of a finished run


@dataclass
class EffectiveQuantities:
    beta_ij: dict        # (i, declared index) -> value in bidder i's scale
    beta: list
    gamma: list
    reserve: list


def effective_quantities(t: Transcript) -> EffectiveQuantities:
    beta_ij, beta, gamma, res = {}, [], [], []
    for i in range(1, t.n + 1):
        d_i = t.distributions[i - 1]
        r = d_i.reserve() if t.mechanism != "spc" else 0.0
        b_all, b_rev = [r], [r]
        for tup in t.inbox[i - 1]:
            m = t.messages[tup.handle]
            if m is None:
                continue
            eff = m if t.mechanism == "spc" else effective_bid(d_i, tup.declared, m)
            beta_ij[(i, tup.declared_index)] = eff
            b_all.append(eff)
            if t.reveals[i - 1][tup.handle]:
                b_rev.append(eff)
        beta.append(max(b_all))
        gamma.append(max(b_rev))
        res.append(r)
    return EffectiveQuantities(beta_ij, beta, gamma, res)


@dataclass
class SafetyReport:
    violations: list  # (clause, bidder, detail)

    @property
    def ok(self):
        return not self.violations

    @property
    def clauses(self):
        return {c for c, _, _ in self.violations}

    @property
    def first(self):
        return min(self.violations, key=lambda v: v[0]) if self.violations else None

    def __str__(self):
        if self.ok:
            return "safe"
        return "; ".join(f"({c}) bidder {b}: {d}" for c, b, d in sorted(self.violations))


def _clears(t, i, eq, revealed_only):
    # tie-aware: bidder i beats a tuple of equal effective bid iff its index is smaller;
    # it beats the reserve on ties
    d_i = t.distributions[i - 1]
    b_i = t.bids[i - 1]
    r = eq.reserve[i - 1]
    if b_i < r:
        return False
    for tup in t.inbox[i - 1]:
        if revealed_only and not t.reveals[i - 1][tup.handle]:
            continue
        m = t.messages[tup.handle]
        if m is None:
            continue
        eff = m if t.mechanism == "spc" else effective_bid(d_i, tup.declared, m)
        if eff > b_i or (eff == b_i and tup.declared_index < i):
            return False
    return True


def validate_safety(t: Transcript, o: Outcome) -> SafetyReport:
    """Check the run against the effective-reveal characterisation of safety.

    (a) the winner clears their effective reveal; (b) no loser does;
    (c) at most one bidder clears their effective commitment; (d) every
    loser's own view resolves to a loss.
    """
    eq = effective_quantities(t)
    out = []
    active = [i for i in range(1, t.n + 1) if t.bidder_revealed[i - 1]]
    if o.winner is not None and not _clears(t, o.winner, eq, True):
        out.append(("a", o.winner, "winner is beaten by a revealed tuple in their view"))
    for i in active:
        if i != o.winner and _clears(t, i, eq, True):
            out.append(("b", i, "loser clears every revealed tuple in their view"))
    over = [i for i in active if _clears(t, i, eq, False)]
    if len(over) > 1:
        for i in over[1:]:
            out.append(("c", i, f"bidders {over} all clear their effective commitment"))
    for v in o.views:
        if v.bidder != o.winner and v.wins:
            out.append(("d", v.bidder, "loser's view resolves to a win"))
    return SafetyReport(out)


@dataclass
class CountReport:
    ok: bool
    counts: list
    detail: str = ""


def check_forwarding_counts(t_or_counts, n: int | None = None, strict: bool = False) -> CountReport:
    """Sorted tuple counts must satisfy n_(j) >= n - j + 1 and sum 1/n_i^2 <= 2."""
    if isinstance(t_or_counts, Transcript):
        t = t_or_counts
        if t.malleable:
            raise PreconditionViolated("count lemma assumes non-malleable commitments")
        counts, n = t.n_i, t.n
    else:
        counts = list(t_or_counts)
        n = len(counts) if n is None else n
    srt = sorted(counts, reverse=True)
    detail = ""
    for j, c in enumerate(srt, start=1):
        if c < n - j + 1:
            detail = f"j={j}: n_(j)={c} < {n - j + 1}"
            break
    if not detail and sum(1.0 / c ** 2 for c in counts) > 2.0:
        detail = "sum of 1/n_i^2 exceeds 2"
    rep = CountReport(not detail, counts, detail)
    if strict and not rep.ok:
        raise CountViolation(detail)
    return rep


def conservation_error(t: Transcript, o: Outcome) -> float:
    """Largest discrepancy among the bookkeeping identities of one run (0 when exact)."""
    bal = o.balances()
    errs = [abs(sum(bal.values()))]
    errs.append(abs(bal.get(SELLER, 0.0) - o.seller_net))
    if t.mechanism == "spc":
        errs.append(abs(bal.get("escrow", 0.0)))
    if o.winner is not None:
        w = o.views[o.winner - 1]
        expected = w.concealed * w.fine_each
        errs.append(abs(o.fines_collected - expected))
        got = bal.get(f"bidder:{o.winner}", 0.0)
        errs.append(abs(got - (-o.price + o.fines_collected)))
    return max(errs)


def load_distribution(spec_or_dist):
    return parse_dist(spec_or_dist) if isinstance(spec_or_dist, str) else spec_or_dist
