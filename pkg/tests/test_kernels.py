import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab import _kernels

numba_only = pytest.mark.skipif(_kernels.NUMBA_IMPL is None, reason="numba not installed")


def _complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_potential_matches_matrix_product():
    rng = np.random.default_rng(0)
    w, z1, z2 = (_complex(rng, 50) for _ in range(3))
    o1, o2 = _kernels.potential_apply(w, z1, z2)
    for i in range(50):
        a = w[i]
        M = np.array([[2 * abs(a) ** 2, a * a], [-np.conj(a) ** 2, -2 * abs(a) ** 2]])
        assert np.allclose(M @ [z1[i], z2[i]], [o1[i], o2[i]], rtol=1e-14, atol=1e-14)


def test_hermite_is_exact_on_cubics():
    dr = 0.1
    r = np.arange(40) * dr
    f, df = 1 + r - 2 * r ** 2 + 0.5 * r ** 3, 1 - 4 * r + 1.5 * r ** 2
    pts = np.linspace(-3.8, 3.8, 101)
    p = np.abs(pts)
    v, d = _kernels.hermite(dr, f, df, pts)
    assert np.allclose(v, 1 + p - 2 * p ** 2 + 0.5 * p ** 3, rtol=1e-12, atol=1e-12)
    assert np.allclose(d, 1 - 4 * p + 1.5 * p ** 2, rtol=1e-12, atol=1e-12)
    v, d = _kernels.hermite(dr, f, df, np.array([3.95, 5.0]))
    assert np.all(v == 0) and np.all(d == 0)


@numba_only
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.integers(1, 200))
def test_pointwise_kernels_agree(seed, n):
    rng = np.random.default_rng(seed)
    w, z1, z2 = (_complex(rng, n) for _ in range(3))
    for name in ("potential", "nonlin"):
        a = getattr(_kernels.NUMPY_IMPL, name)(w, z1, z2)
        b = getattr(_kernels.NUMBA_IMPL, name)(w, z1, z2)
        for x, y in zip(a, b):
            assert np.allclose(x, y, rtol=1e-13, atol=1e-13)


@numba_only
def test_hermite_and_kato_kernels_agree():
    rng = np.random.default_rng(1)
    dr = 0.01
    r = np.arange(500) * dr
    vals, ders = np.exp(-r * r), -2 * r * np.exp(-r * r)
    pts = rng.uniform(-6, 6, 1000)
    for x, y in zip(_kernels.NUMPY_IMPL.hermite(dr, vals, ders, pts),
                    _kernels.NUMBA_IMPL.hermite(dr, vals, ders, pts)):
        assert np.allclose(x, y, rtol=1e-13, atol=1e-15)
    xs, ys, zs = (rng.uniform(-1, 1, 300) for _ in range(3))
    absv = rng.uniform(0, 1, 300)
    targets = np.stack([xs[:5], ys[:5], zs[:5]], axis=1)
    a = _kernels.NUMPY_IMPL.kato_direct(absv, xs, ys, zs, targets, 0.1)
    b = _kernels.NUMBA_IMPL.kato_direct(absv, xs, ys, zs, targets, 0.1)
    assert np.allclose(a, b, rtol=1e-12)


@numba_only
@pytest.mark.parametrize("phi0", [3.0, 4.3373876, 5.0])
def test_shooting_kernels_agree(phi0):
    assert _kernels.NUMPY_IMPL.shoot(phi0, 1.0, 1e-3, 20.0) == _kernels.NUMBA_IMPL.shoot(phi0, 1.0, 1e-3, 20.0)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if _kernels.NUMBA_IMPL else "numpy")])
def test_disable_flag_selects_fallback(flag, expected):
    env = dict(os.environ, NLSLAB_DISABLE_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", "from nlslab import _kernels; print(_kernels.ACTIVE.name)"],
                         capture_output=True, text=True, env=env, check=True)
    assert res.stdout.strip() == expected


def test_fallback_ground_state_matches(profile1_coarse):
    # the radial solve on the numpy path reproduces the default one
    code = ("from nlslab.ground_state import RadialGrid, solve_ground_state; "
            "print(repr(solve_ground_state(1.0, RadialGrid(30.0, 4096)).central_value))")
    env = dict(os.environ, NLSLAB_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert float(res.stdout) == pytest.approx(profile1_coarse.central_value, rel=1e-12)
