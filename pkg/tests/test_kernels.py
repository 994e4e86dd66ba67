import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dralab import _pykernels as py

ck = pytest.importorskip("dralab._ckernels")

values = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


def _same(a, b):
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                                   rtol=1e-12, atol=0)


def _draws(rng, n=2):
    v = rng.exponential(size=(400, n)) * rng.choice([0.5, 3.0])
    return py.top_two(v)


@given(rng=values, n=st.integers(1, 5))
def test_top_two(rng, n):
    v = rng.random((50, n))
    _same(py.top_two(v), ck.top_two(v))


@given(rng=values, m=st.integers(0, 6), fine=st.floats(0, 2), ex_post=st.booleans())
def test_prefix_grid(rng, m, fine, ex_post):
    top, second = _draws(rng)
    grid = np.sort(rng.random(m) * 5)
    grid = np.unique(grid)
    _same(py.prefix_grid(top, second, grid, fine, 1.0, ex_post),
          ck.prefix_grid(top, second, grid, fine, 1.0, ex_post))


@given(rng=values, fixed=st.booleans(), fine=st.floats(0, 2), ex_post=st.booleans())
def test_malleable_grid(rng, fixed, fine, ex_post):
    top, second = _draws(rng, 3)
    grid = 0.3 * 1.25 ** np.arange(8)
    _same(py.malleable_grid(top, second, grid, fixed, 7.0, fine, 1.0, ex_post),
          ck.malleable_grid(top, second, grid, fixed, 7.0, fine, 1.0, ex_post))


@given(rng=values, thr=st.floats(0.5, 4), k=st.floats(0.1, 2))
def test_alpha_tail(rng, thr, k):
    v = rng.pareto(1.0, size=(400, 3)) + 1
    v1 = np.ascontiguousarray(v[:, 0])
    m, m2 = py.top_two(v[:, 1:])
    _same(py.alpha_tail(v1, m, m2, thr, k, 1.0), ck.alpha_tail(v1, m, m2, thr, k, 1.0))


def test_ultra_quantile():
    u = np.random.default_rng(0).random(2000)
    np.testing.assert_allclose(py.ultra_quantile(u), ck.ultra_quantile(u), rtol=1e-12)


def test_env_forces_fallback():
    code = "from dralab import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"DRALAB_KERNELS": "python", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
