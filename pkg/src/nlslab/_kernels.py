"""Hot loops with a numba path and a pure-numpy fallback.

Set ``NLSLAB_DISABLE_NUMBA=1`` before import to force the numpy path.
Both implementations are always importable as ``NUMBA_IMPL`` / ``NUMPY_IMPL``
so the benchmark and the tests can compare them directly.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("NLSLAB_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

# integral of 1/|u| over the unit cube [-1/2, 1/2]^3
CUBE_SELF_INTEGRAL = 3.0 * math.log((math.sqrt(3.0) + 1.0) / (math.sqrt(3.0) - 1.0)) - math.pi / 2.0


# ---------------------------------------------------------------- shooting

def _shoot_loop(phi0, alpha, dr, r_end):
    """RK4 march of phi'' + (2/r) phi' - alpha phi + phi^3 = 0 from a series start.

    Returns (+1, r) if phi crosses zero (overshoot), (-1, r) if phi turns
    upward while positive (undershoot), (0, r_end) if neither happened.
    """
    c2 = (alpha * phi0 - phi0 ** 3) / 3.0
    r = dr
    y0 = phi0 + 0.5 * c2 * r * r
    y1 = c2 * r
    while r < r_end:
        k1a = y1
        k1b = -2.0 / r * y1 + alpha * y0 - y0 ** 3
        rh = r + 0.5 * dr
        ya = y0 + 0.5 * dr * k1a
        yb = y1 + 0.5 * dr * k1b
        k2a = yb
        k2b = -2.0 / rh * yb + alpha * ya - ya ** 3
        ya = y0 + 0.5 * dr * k2a
        yb = y1 + 0.5 * dr * k2b
        k3a = yb
        k3b = -2.0 / rh * yb + alpha * ya - ya ** 3
        rf = r + dr
        ya = y0 + dr * k3a
        yb = y1 + dr * k3b
        k4a = yb
        k4b = -2.0 / rf * yb + alpha * ya - ya ** 3
        y0 = y0 + dr / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        y1 = y1 + dr / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        r = rf
        if y0 < 0.0:
            return 1, r
        if y1 > 0.0:
            return -1, r
    return 0, r_end


# ------------------------------------------------------- hermite lifting

def _hermite_loop(dr, vals, ders, pts):
    n = vals.shape[0]
    out = np.zeros(pts.shape[0])
    dout = np.zeros(pts.shape[0])
    rmax = dr * (n - 1)
    for i in range(pts.shape[0]):
        p = abs(pts[i])
        if p >= rmax:
            continue
        j = int(p / dr)
        if j >= n - 1:
            j = n - 2
        t = p / dr - j
        t2 = t * t
        t3 = t2 * t
        h00 = 2.0 * t3 - 3.0 * t2 + 1.0
        h10 = t3 - 2.0 * t2 + t
        h01 = -2.0 * t3 + 3.0 * t2
        h11 = t3 - t2
        out[i] = h00 * vals[j] + h10 * dr * ders[j] + h01 * vals[j + 1] + h11 * dr * ders[j + 1]
        g00 = (6.0 * t2 - 6.0 * t) / dr
        g10 = 3.0 * t2 - 4.0 * t + 1.0
        g01 = (-6.0 * t2 + 6.0 * t) / dr
        g11 = 3.0 * t2 - 2.0 * t
        dout[i] = g00 * vals[j] + g10 * ders[j] + g01 * vals[j + 1] + g11 * ders[j + 1]
    return out, dout


def _hermite_numpy(dr, vals, ders, pts):
    n = vals.shape[0]
    rmax = dr * (n - 1)
    p = np.abs(pts)
    inside = p < rmax
    j = np.minimum((p / dr).astype(np.int64), n - 2)
    j = np.where(inside, j, 0)
    t = p / dr - j
    t2 = t * t
    t3 = t2 * t
    out = ((2 * t3 - 3 * t2 + 1) * vals[j] + (t3 - 2 * t2 + t) * dr * ders[j]
           + (-2 * t3 + 3 * t2) * vals[j + 1] + (t3 - t2) * dr * ders[j + 1])
    dout = ((6 * t2 - 6 * t) / dr * vals[j] + (3 * t2 - 4 * t + 1) * ders[j]
            + (-6 * t2 + 6 * t) / dr * vals[j + 1] + (3 * t2 - 2 * t) * ders[j + 1])
    return np.where(inside, out, 0.0), np.where(inside, dout, 0.0)


# ------------------------------------------------ pointwise 2x2 operators

def _potential_loop(w, z1, z2):
    o1 = np.empty_like(z1)
    o2 = np.empty_like(z2)
    for i in range(z1.shape[0]):
        a = w[i]
        m = a.real * a.real + a.imag * a.imag
        a2 = a * a
        o1[i] = 2.0 * m * z1[i] + a2 * z2[i]
        o2[i] = -a2.conjugate() * z1[i] - 2.0 * m * z2[i]
    return o1, o2


def _potential_numpy(w, z1, z2):
    m = (w * w.conj()).real
    a2 = w * w
    return 2.0 * m * z1 + a2 * z2, -a2.conj() * z1 - 2.0 * m * z2


def _nonlin_loop(w, z1, z2):
    o1 = np.empty_like(z1)
    o2 = np.empty_like(z2)
    for i in range(z1.shape[0]):
        a = w[i]
        u = z1[i]
        v = z2[i]
        mu = u.real * u.real + u.imag * u.imag
        mv = v.real * v.real + v.imag * v.imag
        o1[i] = -2.0 * mu * a - a.conjugate() * u * u - mu * u
        o2[i] = 2.0 * mv * a.conjugate() + a * v * v + mv * v
    return o1, o2


def _nonlin_numpy(w, z1, z2):
    mu = (z1 * z1.conj()).real
    mv = (z2 * z2.conj()).real
    return (-2.0 * mu * w - w.conj() * z1 * z1 - mu * z1,
            2.0 * mv * w.conj() + w * z2 * z2 + mv * z2)


# ------------------------------------------------- brute Kato quadrature

def _kato_direct_loop(absv, xs, ys, zs, targets, h):
    """Direct sum of |V(y)| h^3 / |x - y|; the self cell uses the cube integral."""
    self_w = CUBE_SELF_INTEGRAL * h * h
    out = np.zeros(targets.shape[0])
    n = absv.shape[0]
    for t in range(targets.shape[0]):
        tx = targets[t, 0]
        ty = targets[t, 1]
        tz = targets[t, 2]
        acc = 0.0
        for i in range(n):
            dx = xs[i] - tx
            dy = ys[i] - ty
            dz = zs[i] - tz
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d < 1e-12 * h:
                acc += absv[i] * self_w
            else:
                acc += absv[i] * h ** 3 / d
        out[t] = acc
    return out


def _kato_direct_numpy(absv, xs, ys, zs, targets, h):
    self_w = CUBE_SELF_INTEGRAL * h * h
    out = np.zeros(targets.shape[0])
    for t in range(targets.shape[0]):
        d = np.sqrt((xs - targets[t, 0]) ** 2 + (ys - targets[t, 1]) ** 2 + (zs - targets[t, 2]) ** 2)
        near = d < 1e-12 * h
        w = np.where(near, self_w, h ** 3 / np.where(near, 1.0, d))
        out[t] = np.sum(absv * w)
    return out


class _Impl:
    def __init__(self, name, shoot, hermite, potential, nonlin, kato):
        self.name = name
        self.shoot = shoot
        self.hermite = hermite
        self.potential = potential
        self.nonlin = nonlin
        self.kato_direct = kato


NUMPY_IMPL = _Impl("numpy", _shoot_loop, _hermite_numpy, _potential_numpy, _nonlin_numpy, _kato_direct_numpy)

if _HAVE_NUMBA:
    NUMBA_IMPL = _Impl(
        "numba",
        njit(cache=True)(_shoot_loop),
        njit(cache=True)(_hermite_loop),
        njit(cache=True)(_potential_loop),
        njit(cache=True)(_nonlin_loop),
        njit(cache=True)(_kato_direct_loop),
    )
else:  # pragma: no cover
    NUMBA_IMPL = None

ACTIVE = NUMBA_IMPL if USE_NUMBA else NUMPY_IMPL


def shoot(phi0: float, alpha: float, dr: float, r_end: float) -> tuple[int, float]:
    code, r = ACTIVE.shoot(float(phi0), float(alpha), float(dr), float(r_end))
    return int(code), float(r)


def hermite(dr: float, vals: np.ndarray, ders: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cubic Hermite interpolation of an even radial function on r_j = j dr; zero beyond the last node."""
    shape = np.shape(pts)
    p = np.ascontiguousarray(np.ravel(pts), dtype=np.float64)
    v, d = ACTIVE.hermite(float(dr), np.ascontiguousarray(vals, dtype=np.float64),
                          np.ascontiguousarray(ders, dtype=np.float64), p)
    return v.reshape(shape), d.reshape(shape)


def potential_apply(w: np.ndarray, z1: np.ndarray, z2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise (2|w|^2 z1 + w^2 z2, -conj(w)^2 z1 - 2|w|^2 z2)."""
    shape = z1.shape
    a = np.ascontiguousarray(np.ravel(w), dtype=np.complex128)
    o1, o2 = ACTIVE.potential(a, np.ascontiguousarray(np.ravel(z1), dtype=np.complex128),
                              np.ascontiguousarray(np.ravel(z2), dtype=np.complex128))
    return o1.reshape(shape), o2.reshape(shape)


def nonlinearity_z(w: np.ndarray, z1: np.ndarray, z2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shape = z1.shape
    a = np.ascontiguousarray(np.ravel(w), dtype=np.complex128)
    o1, o2 = ACTIVE.nonlin(a, np.ascontiguousarray(np.ravel(z1), dtype=np.complex128),
                           np.ascontiguousarray(np.ravel(z2), dtype=np.complex128))
    return o1.reshape(shape), o2.reshape(shape)


def kato_direct(absv: np.ndarray, coords: tuple[np.ndarray, np.ndarray, np.ndarray],
                targets: np.ndarray, h: float) -> np.ndarray:
    xs, ys, zs = (np.ascontiguousarray(np.ravel(c), dtype=np.float64) for c in coords)
    return ACTIVE.kato_direct(np.ascontiguousarray(np.ravel(absv), dtype=np.float64), xs, ys, zs,
                              np.ascontiguousarray(targets, dtype=np.float64), float(h))
