"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Setting ``DRALAB_KERNELS=python`` forces the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DRALAB_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def ultra_quantile(u):
    return _impl.ultra_quantile(_c(u))


def top_two(values):
    return _impl.top_two(np.asarray(values, dtype=np.float64))


def prefix_grid(top, second, grid, fine, reserve, ex_post=True):
    return _impl.prefix_grid(_c(top), _c(second), _c(grid), float(fine), float(reserve),
                             bool(ex_post))


def malleable_grid(top, second, grid, ystar_fixed, fixed_value, fine, reserve, ex_post=False):
    return _impl.malleable_grid(_c(top), _c(second), _c(grid), bool(ystar_fixed),
                                float(fixed_value), float(fine), float(reserve), bool(ex_post))


def alpha_tail(v1, m, m2, threshold, k, reserve):
    return _impl.alpha_tail(_c(v1), _c(m), _c(m2), float(threshold), float(k), float(reserve))
