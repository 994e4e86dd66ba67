# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernels.  Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, ceil, INFINITY, fmax, fmin

cnp.import_array()

cdef double LOGH_HI = 4.5
cdef int BISECT_STEPS = 64


cdef inline double _log_hprime(double y, double *h) noexcept nogil:
    cdef double c = fmax(1.0, ceil(y))
    cdef double t = 1.0 + (y - c)
    cdef double acc = 0.0
    cdef int s
    for s in range(<int>c):
        acc += t
        t = exp(fmin(t, 710.0))
    h[0] = t
    return acc


def ultra_quantile(const double[::1] u):
    cdef Py_ssize_t i, n = u.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double lo, hi, mid, target, h
    cdef int it
    with nogil:
        for i in range(n):
            target = -log1p(-u[i])
            lo = 0.0
            hi = LOGH_HI
            for it in range(BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                if _log_hprime(mid, &h) >= target:
                    hi = mid
                else:
                    lo = mid
            _log_hprime(hi, &h)
            o[i] = h
    return out


def top_two(const double[:, :] values):
    cdef Py_ssize_t i, j, n = values.shape[0], w = values.shape[1]
    top = np.empty(n, dtype=np.float64)
    second = np.empty(n, dtype=np.float64)
    cdef double[::1] t = top
    cdef double[::1] s = second
    cdef double a, b, x
    with nogil:
        for i in range(n):
            a = -INFINITY
            b = -INFINITY
            for j in range(w):
                x = values[i, j]
                if x > a:
                    b = a
                    a = x
                elif x > b:
                    b = x
            t[i] = a
            s[i] = b
    return top, second


cdef inline Py_ssize_t _count_le(const double[::1] grid, double v) noexcept nogil:
    # number of grid points <= v (grid ascending)
    cdef Py_ssize_t lo = 0, hi = grid.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if grid[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def prefix_grid(const double[::1] top, const double[::1] second, const double[::1] grid,
                double fine, double reserve, bint ex_post):
    cdef Py_ssize_t i, n = top.shape[0], m = grid.shape[0], j, c
    net = np.empty(n, dtype=np.float64)
    gross = np.empty(n, dtype=np.float64)
    fines = np.empty(n, dtype=np.float64)
    conceal = np.empty(n, dtype=np.int64)
    big = np.empty(n, dtype=np.bool_)
    cdef double[::1] o_net = net
    cdef double[::1] o_gross = gross
    cdef double[::1] o_fines = fines
    cdef long long[::1] o_conc = conceal
    cdef cnp.npy_bool[::1] o_big = big
    cdef double v, price, pnet
    cdef bint sale
    with nogil:
        for i in range(n):
            v = top[i]
            j = _count_le(grid, v)
            c = m - j
            price = fmax(reserve, second[i])
            if j > 0:
                price = fmax(price, grid[j - 1])
            pnet = price - c * fine
            sale = v >= reserve
            if ex_post and c > 0 and pnet <= 0:
                sale = False
            if sale:
                o_gross[i] = price
                o_fines[i] = c * fine
                o_conc[i] = c
            else:
                o_gross[i] = 0.0
                o_fines[i] = 0.0
                o_conc[i] = 0
            o_net[i] = o_gross[i] - o_fines[i]
            o_big[i] = v >= reserve and v > second[i] and (m == 0 or v >= grid[m - 1])
    return net, gross, fines, conceal, big


def malleable_grid(const double[::1] top, const double[::1] second, const double[::1] grid,
                   bint ystar_fixed, double fixed_value, double fine, double reserve,
                   bint ex_post):
    cdef Py_ssize_t i, n = top.shape[0], m = grid.shape[0], j, c
    net = np.empty(n, dtype=np.float64)
    gross = np.empty(n, dtype=np.float64)
    fines = np.empty(n, dtype=np.float64)
    conceal = np.empty(n, dtype=np.int64)
    big = np.empty(n, dtype=np.bool_)
    cdef double[::1] o_net = net
    cdef double[::1] o_gross = gross
    cdef double[::1] o_fines = fines
    cdef long long[::1] o_conc = conceal
    cdef cnp.npy_bool[::1] o_big = big
    cdef double v, ystar, price, pnet
    cdef bint hidden, sale
    with nogil:
        for i in range(n):
            v = top[i]
            ystar = fixed_value if ystar_fixed else second[i]
            j = _count_le(grid, v)
            hidden = ystar > v
            c = (m - j) + (1 if hidden else 0)
            price = reserve
            if j > 0:
                price = fmax(price, grid[j - 1])
            if not hidden:
                price = fmax(price, ystar)
            pnet = price - c * fine
            sale = v >= reserve
            if ex_post:
                if c > 0 and pnet <= 0:
                    sale = False
            elif j == 0:
                sale = False
            if sale:
                o_gross[i] = price
                o_fines[i] = c * fine
                o_conc[i] = c
            else:
                o_gross[i] = 0.0
                o_fines[i] = 0.0
                o_conc[i] = 0
            o_net[i] = o_gross[i] - o_fines[i]
            o_big[i] = v >= reserve and v >= grid[m - 1] and not hidden
    return net, gross, fines, conceal, big


def alpha_tail(const double[::1] v1, const double[::1] m, const double[::1] m2,
               double threshold, double k, double reserve):
    cdef Py_ssize_t i, n = v1.shape[0]
    attack = np.empty(n, dtype=np.float64)
    honest = np.empty(n, dtype=np.float64)
    fines = np.empty(n, dtype=np.float64)
    big = np.empty(n, dtype=np.bool_)
    cdef double[::1] o_att = attack
    cdef double[::1] o_hon = honest
    cdef double[::1] o_fines = fines
    cdef cnp.npy_bool[::1] o_big = big
    cdef double a, mm, top, second, h, b
    cdef bint trig, concealing
    with nogil:
        for i in range(n):
            a = v1[i]
            mm = m[i]
            top = fmax(a, mm)
            second = fmax(fmin(a, mm), m2[i])
            h = fmax(reserve, second) if top >= reserve else 0.0
            o_hon[i] = h
            o_att[i] = h
            o_fines[i] = 0.0
            b = mm + k
            trig = mm > threshold
            concealing = trig and a > threshold and a < b and a > mm
            if trig and a >= b:
                o_att[i] = b
            elif concealing:
                o_att[i] = h - k
                o_fines[i] = k
            o_big[i] = top >= reserve and top > second and not (trig and a > mm and a < b)
    return attack, honest, fines, big
