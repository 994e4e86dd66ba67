"""Pure numpy implementations of the Monte-Carlo kernels.

Semantics must match ``_ckernels.pyx`` exactly; the test-suite compares them.
All kernels assume i.i.d. bidders (virtual-value order equals value order)
and seller identities placed after the real bidders in tie-breaking, so a
fake bid equal to the target's bid does not beat it.
"""
import numpy as np

_LOGH_HI = 4.5
_BISECT_STEPS = 64


def _log_hprime(y):
    # log h'(y) = sum of the tetration tower below level y
    c = np.maximum(1.0, np.ceil(y))
    t = 1.0 + (y - c)
    acc = np.zeros_like(y)
    with np.errstate(over="ignore"):
        for s in range(int(c.max())):
            active = s < c
            acc = np.where(active, acc + t, acc)
            t = np.where(active, np.exp(np.minimum(t, 710.0)), t)
    return acc, t


def ultra_quantile(u):
    u = np.asarray(u, dtype=np.float64)
    target = -np.log1p(-u)
    lo = np.zeros_like(u)
    hi = np.full_like(u, _LOGH_HI)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        val, _ = _log_hprime(mid)
        up = val >= target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    _, h = _log_hprime(hi)
    return h


def top_two(values):
    values = np.asarray(values, dtype=np.float64)
    if values.shape[1] == 1:
        return values[:, 0].copy(), np.full(values.shape[0], -np.inf)
    part = np.partition(values, values.shape[1] - 2, axis=1)
    return part[:, -1].copy(), part[:, -2].copy()


def prefix_grid(top, second, grid, fine, reserve, ex_post):
    top = np.asarray(top, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    m = grid.size
    j = np.searchsorted(grid, top, side="right")
    conceal = (m - j).astype(np.int64)
    price = np.maximum(reserve, second)
    if m:
        below = np.where(j > 0, grid[np.maximum(j - 1, 0)], -np.inf)
        price = np.maximum(price, below)
    net = price - conceal * fine
    sale = top >= reserve
    if ex_post:
        sale &= ~((conceal > 0) & (net <= 0))
    gross = np.where(sale, price, 0.0)
    fines = np.where(sale, conceal * fine, 0.0)
    conceal = np.where(sale, conceal, 0)
    net = gross - fines
    big = (top >= reserve) & (top > second)
    if m:
        big &= top >= grid[-1]
    return net, gross, fines, conceal, big


def malleable_grid(top, second, grid, ystar_fixed, fixed_value, fine, reserve, ex_post):
    top = np.asarray(top, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    ystar = np.full_like(top, fixed_value) if ystar_fixed else second
    j = np.searchsorted(grid, top, side="right")
    y_hidden = ystar > top
    conceal = (grid.size - j) + y_hidden.astype(np.int64)
    price = np.maximum(reserve, np.where(j > 0, grid[np.maximum(j - 1, 0)], -np.inf))
    price = np.maximum(price, np.where(y_hidden, -np.inf, ystar))
    net = price - conceal * fine
    if ex_post:
        sale = (top >= reserve) & ~((conceal > 0) & (net <= 0))
    else:
        # open everything below the grid, otherwise conceal regardless of cost
        sale = (top >= reserve) & (j > 0)
    gross = np.where(sale, price, 0.0)
    fines = np.where(sale, conceal * fine, 0.0)
    conceal = np.where(sale, conceal, 0).astype(np.int64)
    net = gross - fines
    big = (top >= reserve) & (top >= grid[-1]) & ~y_hidden
    return net, gross, fines, conceal, big


def alpha_tail(v1, m, m2, threshold, k, reserve):
    v1 = np.asarray(v1, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    m2 = np.asarray(m2, dtype=np.float64)
    top = np.maximum(v1, m)
    second = np.maximum(np.minimum(v1, m), m2)
    honest = np.where(top >= reserve, np.maximum(reserve, second), 0.0)
    b = m + k
    trig = m > threshold
    win_reveal = trig & (v1 >= b)
    win_conceal = trig & (v1 > threshold) & (v1 < b) & (v1 > m)
    attack = np.where(win_reveal, b, honest)
    attack = np.where(win_conceal, honest - k, attack)
    fines = np.where(win_conceal, k, 0.0)
    big = (top >= reserve) & (top > second)
    big &= ~(trig & (v1 > m) & (v1 < b))
    return attack, honest, fines, big
