"""Value distributions, virtual values, hazard rates and revenue calculus.

Every family exposes the same small surface (cdf, tail, pdf, quantile,
virtual_value, hazard_rate, reserve, mean).  Scalar inputs return floats;
``quantile`` is vectorised because the Monte-Carlo paths feed it arrays.

Conventions
-----------
``sf(v)``   is Pr[X > v]
``tail(v)`` is Pr[X >= v]  (differs from sf only at atoms)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from . import kernels
from .errors import (InfiniteMean, NonRegular, PreconditionViolated, SearchFailed, SpecError,
                     TailExhausted)

_MAX_DEPTH = 64
_EXP_MAX = 709.782712893384
_INV_ATOL = 1e-12


def _num(x):
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


# ---------------------------------------------------------------------------
# tetration extension and its inverse


def tetration(y):
    """h(y): 1+y on (-1, 0], exp(h(y-1)) above.  Returns inf on overflow."""
    y = float(y)
    if y < -1:
        raise ValueError("tetration defined for y >= -1")
    c = 0
    while y > 0 and c < _MAX_DEPTH:
        y -= 1.0
        c += 1
    val = 1.0 + y
    for _ in range(c):
        if val > _EXP_MAX:
            return math.inf
        val = math.exp(val)
    return val


def superlog(x):
    """ln*(x): x-1 on (0, 1], 1 + ln*(ln x) above."""
    x = float(x)
    if not x > 0:
        raise ValueError("superlog needs x > 0")
    c = 0
    while x > 1 and c < _MAX_DEPTH:
        x = math.log(x)
        c += 1
    return c + x - 1.0


def _tower(y):
    # t[0] = h(y - c) with y - c in [-1, 0], t[i+1] = exp(t[i]); t[c] = h(y)
    if not math.isfinite(y):
        return 1, [math.inf, math.inf]
    c = max(1, math.ceil(y))
    t = [1.0 + (y - c)]
    for _ in range(c):
        t.append(math.exp(t[-1]) if t[-1] <= _EXP_MAX else math.inf)
    return c, t


def log_tetration_slope(y):
    """log h'(y) = sum_{j>=1} h(y - j) over the recursion levels."""
    c, t = _tower(y)
    return math.fsum(t[:c])


def _tetration_curvature_ratio(y):
    # h''(y)/h'(y) = sum_{j=1..c} h'(y - j)
    c, t = _tower(y)
    total, acc = 0.0, 0.0
    partial = [0.0]
    for i in range(c):
        acc += t[i]
        partial.append(acc)
    for j in range(1, c + 1):
        lg = partial[c - j]
        total += math.exp(lg) if lg <= _EXP_MAX else math.inf
    return total


# ---------------------------------------------------------------------------
# base class


def _scalar(x):
    a = np.asarray(x, dtype=float)
    return float(a) if a.ndim == 0 else a


class Distribution:
    family = ""
    discrete = False
    finite_mean = True
    # families whose revenue is not captured by E[phi+] (mass escapes to infinity)
    welfare_route = True

    support_lo = 0.0
    support_hi = math.inf
    alpha_strong = None

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.spec

    def cdf(self, v):
        raise NotImplementedError

    def sf(self, v):
        return 1.0 - self.cdf(v)

    def tail(self, v):
        return self.sf(v)

    def pdf(self, v):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def virtual_value(self, v):
        raise NotImplementedError

    def inverse_virtual_value(self, y):
        """inf{x : phi(x) >= y}, by bracketing and bisection."""
        lo = self.support_lo
        if self.virtual_value(lo) >= y:
            return lo
        hi = max(2.0 * lo, lo + 1.0)
        while True:
            if hi >= self.support_hi:
                hi = self.support_hi
                if self.virtual_value(hi) < y:
                    return math.inf
                break
            if self.virtual_value(hi) >= y:
                break
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                return math.inf
        while hi - lo > _INV_ATOL * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.virtual_value(mid) >= y:
                hi = mid
            else:
                lo = mid
        return hi

    def hazard_rate(self, v):
        s = self.tail(v) if self.discrete else self.sf(v)
        if s <= 0:
            raise TailExhausted(f"{self.spec}: no mass at or above {v}")
        return self.pdf(v) / s

    def reserve(self):
        return self.inverse_virtual_value(0.0)

    def mean(self):
        if not self.finite_mean:
            raise InfiniteMean(self.spec)
        lo = self.support_lo
        val, _ = integrate.quad(self.sf, lo, self.support_hi, limit=500, epsrel=1e-10)
        return lo + val

    def check_regular(self, grid=None):
        """Raise NonRegular if phi decreases on a test grid."""
        if grid is None:
            grid = self.test_grid(200)
        phi = np.array([self.virtual_value(x) for x in grid])
        if np.any(np.diff(phi) < -1e-9 * np.maximum(1.0, np.abs(phi[1:]))):
            raise NonRegular(self.spec)

    def test_grid(self, size=1000):
        lo = max(self.support_lo, 1e-3)
        hi = self.support_hi if math.isfinite(self.support_hi) else float(self.quantile(1 - 1e-9))
        return np.geomspace(lo, max(hi, lo * 1.0001), size)


# ---------------------------------------------------------------------------
# continuous families


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    family = "exponential"
    alpha_strong = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise SpecError("exponential rate must be positive")

    @property
    def spec(self):
        return f"exp:{_num(self.rate)}"

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v <= 0, 0.0, -np.expm1(-self.rate * np.maximum(v, 0.0))))

    def sf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v <= 0, 1.0, np.exp(-self.rate * np.maximum(v, 0.0))))

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(v, 0.0))))

    def quantile(self, u):
        return _scalar(-np.log1p(-np.asarray(u, dtype=float)) / self.rate)

    def virtual_value(self, v):
        return _scalar(np.asarray(v, dtype=float) - 1.0 / self.rate)

    def inverse_virtual_value(self, y):
        return max(0.0, y + 1.0 / self.rate)

    def hazard_rate(self, v):
        return float(self.rate)

    def reserve(self):
        return 1.0 / self.rate

    def mean(self):
        return 1.0 / self.rate


@dataclass(frozen=True)
class PowerTailAlpha(Distribution):
    """F(v) = 1 - v^(-1/(1-alpha)) on [1, inf); phi(v) = alpha v."""

    alpha: float = 0.5

    family = "power_tail"
    support_lo = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise SpecError("alpha must lie in (0, 1)")

    @property
    def alpha_strong(self):
        return self.alpha

    @property
    def spec(self):
        return f"alpha:{_num(self.alpha)}"

    @property
    def _p(self):
        return 1.0 / (1.0 - self.alpha)

    def sf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v <= 1, 1.0, np.maximum(v, 1.0) ** -self._p))

    def cdf(self, v):
        return 1.0 - self.sf(v)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v < 1, 0.0, self._p * np.maximum(v, 1.0) ** (-self._p - 1.0)))

    def quantile(self, u):
        return _scalar((1.0 - np.asarray(u, dtype=float)) ** -(1.0 - self.alpha))

    def virtual_value(self, v):
        return _scalar(self.alpha * np.asarray(v, dtype=float))

    def inverse_virtual_value(self, y):
        return max(1.0, y / self.alpha)

    def hazard_rate(self, v):
        return 1.0 / ((1.0 - self.alpha) * v)

    def reserve(self):
        return 1.0

    def mean(self):
        return 1.0 / self.alpha


@dataclass(frozen=True)
class EqualRevenue(Distribution):
    """F(v) = 1 - 1/v on [1, inf).  Every posted price earns 1."""

    family = "equal_revenue"
    support_lo = 1.0
    alpha_strong = 0.0
    finite_mean = False
    welfare_route = False

    @property
    def spec(self):
        return "er"

    def sf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v <= 1, 1.0, 1.0 / np.maximum(v, 1.0)))

    def cdf(self, v):
        return 1.0 - self.sf(v)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v < 1, 0.0, 1.0 / np.maximum(v, 1.0) ** 2))

    def quantile(self, u):
        return _scalar(1.0 / (1.0 - np.asarray(u, dtype=float)))

    def virtual_value(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v < 1, -np.inf, 0.0))

    def inverse_virtual_value(self, y):
        return 1.0 if y <= 0 else math.inf

    def hazard_rate(self, v):
        return 1.0 / v

    def reserve(self):
        return 1.0


@dataclass(frozen=True)
class UltraExponential(Distribution):
    """Pr[v > x] = 1/h'(ln* x) for x > 1, with h the tetration extension.

    Infinite mean, yet p * Pr[v >= p] <= 1 for every price p.
    """

    family = "ultra_exponential"
    support_lo = 1.0
    alpha_strong = 0.0
    finite_mean = False
    welfare_route = False

    @property
    def spec(self):
        return "ultra"

    def sf(self, v):
        if np.ndim(v):
            return np.array([self.sf(x) for x in np.asarray(v, dtype=float)])
        if v <= 1:
            return 1.0
        return math.exp(-log_tetration_slope(superlog(v)))

    def cdf(self, v):
        return 1.0 - self.sf(v)

    def pdf(self, v):
        if np.ndim(v):
            return np.array([self.pdf(x) for x in np.asarray(v, dtype=float)])
        if v < 1:
            return 0.0
        y = superlog(v)
        return _tetration_curvature_ratio(y) * math.exp(-2.0 * log_tetration_slope(y))

    def hazard_rate(self, v):
        if v < 1:
            return 0.0
        y = superlog(v)
        lg = log_tetration_slope(y)
        if lg > _EXP_MAX:
            raise TailExhausted("ultra tail below double precision")
        return _tetration_curvature_ratio(y) * math.exp(-lg)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar(kernels.ultra_quantile(u.ravel()).reshape(u.shape))

    def virtual_value(self, v):
        if np.ndim(v):
            return np.array([self.virtual_value(x) for x in np.asarray(v, dtype=float)])
        if v < 1:
            return -math.inf
        y = superlog(v)
        lg = log_tetration_slope(y)
        return v - math.exp(lg - math.log(_tetration_curvature_ratio(y)))

    def reserve(self):
        return 1.0


# ---------------------------------------------------------------------------
# atom-bearing families


@dataclass(frozen=True)
class DiscreteTwoPoint(Distribution):
    """Values 1 and 2 with probability one half each."""

    family = "two_point"
    discrete = True
    support_lo = 1.0
    support_hi = 2.0
    atoms = (1.0, 2.0)
    masses = (0.5, 0.5)

    @property
    def spec(self):
        return "two"

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v < 1, 0.0, np.where(v < 2, 0.5, 1.0)))

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v <= 1, 1.0, np.where(v <= 2, 0.5, 0.0)))

    def pdf(self, v):
        return 0.5 if v in (1.0, 2.0) else 0.0

    def quantile(self, u):
        return _scalar(np.where(np.asarray(u, dtype=float) < 0.5, 1.0, 2.0))

    def virtual_value(self, v):
        # discrete marginal revenue at the atom at or below v
        if v < 1:
            return -math.inf
        return 0.0 if v < 2 else 2.0

    def inverse_virtual_value(self, y):
        if y <= 0:
            return 1.0
        return 2.0 if y <= 2 else math.inf

    def reserve(self):
        return 1.0

    def mean(self):
        return 1.5


@dataclass(frozen=True)
class Truncated(Distribution):
    """Base distribution with all mass above ``cap`` moved onto ``cap``."""

    base: Distribution
    cap: float

    family = "truncated"

    def __post_init__(self):
        if not self.cap > self.base.support_lo:
            raise SpecError("truncation cap must exceed the support floor")

    @property
    def spec(self):
        return f"trunc:{self.base.spec}:{_num(self.cap)}"

    @property
    def support_lo(self):
        return self.base.support_lo

    @property
    def support_hi(self):
        return float(self.cap)

    @property
    def alpha_strong(self):
        return self.base.alpha_strong

    @property
    def discrete(self):
        return self.base.discrete

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v >= self.cap, 1.0, self.base.cdf(v)))

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v > self.cap, 0.0, self.base.tail(np.minimum(v, self.cap))))

    def sf(self, v):
        v = np.asarray(v, dtype=float)
        return _scalar(np.where(v >= self.cap, 0.0, self.base.sf(np.minimum(v, self.cap))))

    def pdf(self, v):
        if v == self.cap:
            return float(self.base.tail(self.cap))
        return 0.0 if v > self.cap else self.base.pdf(v)

    def hazard_rate(self, v):
        if v >= self.cap:
            return math.inf if v == self.cap else 0.0
        return self.base.hazard_rate(v)

    def quantile(self, u):
        return _scalar(np.minimum(self.base.quantile(u), self.cap))

    def virtual_value(self, v):
        # no mass above the cap, so the atom's marginal revenue is the cap itself
        return float(self.cap) if v >= self.cap else self.base.virtual_value(v)

    def reserve(self):
        return min(self.base.reserve(), float(self.cap))

    def mean(self):
        lo = self.support_lo
        val, _ = integrate.quad(self.base.sf, lo, self.cap, limit=500, epsrel=1e-10)
        return lo + val


@dataclass(frozen=True)
class Discretized(Distribution):
    """Mass of [i eps, (i+1) eps) placed at i eps."""

    base: Distribution
    step: float

    family = "discretized"
    discrete = True

    def __post_init__(self):
        if not self.step > 0:
            raise SpecError("discretization step must be positive")

    @property
    def spec(self):
        return f"disc:{self.base.spec}:{_num(self.step)}"

    @property
    def finite_mean(self):
        return self.base.finite_mean

    def _floor(self, x):
        return np.floor(np.asarray(x, dtype=float) / self.step + 1e-9)

    @property
    def support_lo(self):
        return float(self._floor(self.base.support_lo) * self.step)

    @property
    def support_hi(self):
        hi = self.base.support_hi
        return float(self._floor(hi) * self.step) if math.isfinite(hi) else math.inf

    def cdf(self, v):
        k = self._floor(v)
        return _scalar(1.0 - self.base.tail((k + 1.0) * self.step))

    def tail(self, v):
        k = np.ceil(np.asarray(v, dtype=float) / self.step - 1e-9)
        return _scalar(self.base.tail(k * self.step))

    def pdf(self, v):
        return float(self.tail(v) - self.sf(v))

    def quantile(self, u):
        return _scalar(self._floor(self.base.quantile(u)) * self.step)

    def virtual_value(self, v):
        a = float(self._floor(v) * self.step)
        mass = self.pdf(a)
        if mass <= 0:
            return -math.inf
        return a - self.step * float(self.sf(a)) / mass

    def mean(self):
        if not self.finite_mean:
            raise InfiniteMean(self.spec)
        # E[X^eps] = lo_atom + eps * sum_{i} Pr[X^eps >= atom_i] over atoms above the floor
        start = int(self._floor(self.base.support_lo)) + 1
        total = self.support_lo
        chunk = 1 << 16
        i = start
        while True:
            idx = np.arange(i, i + chunk, dtype=float)
            t = np.asarray(self.base.tail(idx * self.step), dtype=float)
            total += self.step * math.fsum(t)
            i += chunk
            if t[-1] < 1e-13 or i - start > 1 << 25:
                break
        x_end = i * self.step
        if math.isfinite(self.base.support_hi) and x_end >= self.base.support_hi:
            return total
        # substitute u = 1/x so power tails become a finite-interval integral
        rest, _ = integrate.quad(lambda u: float(self.base.sf(1.0 / u)) / (u * u), 0.0,
                                 1.0 / x_end, limit=200)
        return total + rest


# ---------------------------------------------------------------------------
# functional surface


def cdf(d: Distribution, v):
    return d.cdf(v)


def virtual_value(d: Distribution, v):
    return d.virtual_value(v)


def inverse_virtual_value(d: Distribution, y):
    return d.inverse_virtual_value(y)


def hazard_rate(d: Distribution, v):
    return d.hazard_rate(v)


def reserve(d: Distribution):
    return d.reserve()


def sample(d: Distribution, rng, size=None):
    return d.sample(rng, size)


def discretize(d: Distribution, step: float) -> Discretized:
    return Discretized(d, step)


def parse_dist(spec: str) -> Distribution:
    """Parse 'exp:<rate>', 'alpha:<a>', 'er', 'ultra', 'two', 'trunc:<spec>:<T>' or
    'disc:<spec>:<eps>'."""
    s = spec.strip()
    head, _, rest = s.partition(":")
    try:
        if head == "exp":
            return Exponential(float(rest) if rest else 1.0)
        if head == "alpha":
            return PowerTailAlpha(float(rest))
        if head in ("er", "ultra", "two") and not rest:
            return {"er": EqualRevenue, "ultra": UltraExponential, "two": DiscreteTwoPoint}[head]()
        if head in ("trunc", "disc"):
            inner, _, last = rest.rpartition(":")
            if not inner:
                raise SpecError(f"missing argument in {spec!r}")
            base = parse_dist(inner)
            cls = Truncated if head == "trunc" else Discretized
            return cls(base, float(last))
    except ValueError as exc:
        raise SpecError(f"bad distribution spec {spec!r}: {exc}") from None
    raise SpecError(f"unknown distribution spec {spec!r}")


# ---------------------------------------------------------------------------
# revenue


@dataclass(frozen=True)
class RevenueFigure:
    reserve: float
    rev_single: float
    rev_n: float
    method: str
    std_error: float | None = None


def _welfare_quadrature(d, n):
    # E[max(0, phi(M))], M the max of n draws, in quantile space
    r = d.reserve()
    w0 = float(d.cdf(r)) ** n

    def integrand(w):
        return max(0.0, float(d.virtual_value(d.quantile(w ** (1.0 / n)))))

    val, _ = integrate.quad(integrand, w0, 1.0, limit=500, epsrel=1e-8, epsabs=1e-12)
    return val


def _payment_quadrature(d, n):
    # winner pays max(r, second highest) when the top value clears r
    r = d.reserve()
    first = r * (1.0 - (1.0 - float(d.tail(r))) ** n)
    if n == 1:
        return first

    def second_above(x):
        f = float(d.cdf(x))
        return 1.0 - f ** n - n * (1.0 - f) * f ** (n - 1)

    hi = d.support_hi
    pts = list(d.atoms) if hasattr(d, "atoms") else None
    if math.isfinite(hi):
        val, _ = integrate.quad(second_above, r, hi, points=pts, limit=500, epsrel=1e-10)
    else:
        val, _ = integrate.quad(second_above, r, math.inf, limit=500, epsrel=1e-10)
    return first + val


def _revenue(d, n):
    if d.discrete or not d.welfare_route:
        return _payment_quadrature(d, n)
    return _welfare_quadrature(d, n)


def _closed_form_single(d):
    if isinstance(d, Exponential):
        return math.exp(-1.0) / d.rate
    if isinstance(d, (PowerTailAlpha, EqualRevenue, UltraExponential, DiscreteTwoPoint)):
        return 1.0
    return None


def myerson_revenue(d: Distribution, n: int = 1, method: str = "quadrature",
                    trials: int = 100_000, seed: int = 0) -> RevenueFigure:
    """Optimal expected revenue for n i.i.d. bidders from ``d``."""
    if n < 1:
        raise PreconditionViolated("n must be at least 1")
    r = d.reserve()
    if method == "closed_form":
        single = _closed_form_single(d)
        if single is None:
            raise PreconditionViolated(f"no closed form for {d.spec}")
        rev_n = single if n == 1 else _revenue(d, n)
        return RevenueFigure(r, single, rev_n, "closed_form")
    if method == "quadrature":
        return RevenueFigure(r, _revenue(d, 1), _revenue(d, n), "quadrature")
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        vals = np.sort(d.quantile(rng.random((trials, n))).reshape(trials, n), axis=1)
        top = vals[:, -1]
        if d.discrete or not d.welfare_route:
            second = vals[:, -2] if n > 1 else np.full(trials, -np.inf)
            x = np.where(top >= r, np.maximum(r, second), 0.0)
        else:
            x = np.maximum(0.0, np.asarray(d.virtual_value(top), dtype=float))
        mean = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(trials))
        return RevenueFigure(r, _revenue(d, 1), mean, "monte_carlo", se)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# bounds for alpha-strongly regular families


class TailBounds(NamedTuple):
    power: float
    exponential: float


def _alpha_or_raise(d):
    if d.alpha_strong is None:
        raise PreconditionViolated(f"{d.spec} has no strong-regularity certificate")
    return float(d.alpha_strong)


def tail_bound_alpha(d: Distribution, x: float) -> TailBounds:
    """Both upper bounds on Pr[v >= x] for x at or above the reserve."""
    a = _alpha_or_raise(d)
    r = d.reserve()
    if x < r * (1 - 1e-12):
        raise PreconditionViolated("x must be at least the reserve")
    base = float(d.tail(r))
    if a >= 1.0:
        b = base * math.exp(-(x / r - 1.0))
        return TailBounds(b, b)
    power = base * (r / ((1.0 - a) * x + a * r)) ** (1.0 / (1.0 - a))
    expo = base * math.exp(-(x / r - 1.0) / (a + (1.0 - a) * x / r))
    return TailBounds(power, expo)


def pricing_bound_alpha(d: Distribution, p: float) -> float:
    """Upper bound on p * Pr[v >= p] for p at or above the reserve.

    At alpha = 1 the closed form degenerates; the exponential tail bound is used.
    """
    a = _alpha_or_raise(d)
    r = d.reserve()
    if p < r * (1 - 1e-12):
        raise PreconditionViolated("price must be at least the reserve")
    base = float(d.tail(r))
    if a >= 1.0:
        return p * base * math.exp(-(p / r - 1.0))
    return r * base * (1.0 - a) ** (-1.0 / (1.0 - a)) * (r / p) ** (a / (1.0 - a))


def hazard_lower_bound(d: Distribution, v: float, v_prime: float) -> float:
    a = _alpha_or_raise(d)
    if v_prime < v:
        raise PreconditionViolated("need v_prime >= v")
    if v < d.support_lo:
        raise PreconditionViolated("v outside support")
    return 1.0 / ((1.0 - a) * (v_prime - v) + 1.0 / d.hazard_rate(v))


# ---------------------------------------------------------------------------
# extreme values of MHR maxima


def _max_tail(d, n, t):
    # Pr[M >= t]
    return 1.0 - (1.0 - float(d.tail(t))) ** n


def max_tail_expectation(d: Distribution, n: int, t: float) -> float:
    """E[M * I(M >= t)] for M the max of n draws."""
    head = t * _max_tail(d, n, t)
    hi = d.support_hi
    if hi <= t:
        return head

    def s(x):
        return 1.0 - float(d.cdf(x)) ** n

    val, _ = integrate.quad(s, t, hi if math.isfinite(hi) else math.inf, limit=500)
    return head + val


ANCHOR_EPSILONS = (2.0 ** -6, 2.0 ** -11)


def anchoring_conditions(d: Distribution, n: int, beta: float):
    """(Pr[M >= beta/2], [(lhs, rhs) per epsilon]) evaluated by quadrature."""
    prob = _max_tail(d, n, beta / 2.0)
    tails = []
    for eps in ANCHOR_EPSILONS:
        lg = math.log(1.0 / eps)
        tails.append((max_tail_expectation(d, n, 2.0 * beta * lg), 36.0 * beta * eps * lg))
    return prob, tails


def anchoring_point(d: Distribution, n: int) -> float:
    """Largest beta on a geometric grid meeting both extreme-value conditions."""
    bounded = math.isfinite(d.support_hi)
    if not (bounded or (d.alpha_strong is not None and d.alpha_strong >= 1.0)):
        raise PreconditionViolated(f"{d.spec} is not MHR")
    target = 1.0 - math.exp(-0.5)
    top = 2.0 * float(d.quantile(math.exp(-0.5) ** (1.0 / n)))
    if top <= 0:
        raise SearchFailed("degenerate maximum")
    for beta in top * 0.9 ** np.arange(60):
        prob, tails = anchoring_conditions(d, n, float(beta))
        if prob >= target and all(lhs <= rhs for lhs, rhs in tails):
            return float(beta)
    raise SearchFailed(f"no anchoring point for {d.spec}, n={n}")
