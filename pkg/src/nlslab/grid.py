"""Periodic 3D grids, spinor fields, spectral derivatives and inner products."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigInvalid, GridMismatch


def fftn(u: np.ndarray) -> np.ndarray:
    return sfft.fftn(u, workers=-1)


def ifftn(u: np.ndarray) -> np.ndarray:
    return sfft.ifftn(u, workers=-1)


@dataclass(frozen=True)
class Grid3D:
    """Uniform periodic grid on [-L, L)^3 with n nodes per axis."""

    n: int
    L: float
    periodic: bool = True

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ConfigInvalid(f"grid size must be even and >= 4, got {self.n}")
        if not self.L > 0:
            raise ConfigInvalid(f"box half-width must be positive, got {self.L}")
        if not self.periodic:
            raise ConfigInvalid("only periodic grids are supported (spectral Laplacian)")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dv(self) -> float:
        return self.h ** 3

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def k1d(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.x1d, self.x1d, self.x1d, indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y, Z = self.coords
        return np.sqrt(X * X + Y * Y + Z * Z)

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k1d
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.kvec
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kmax = np.pi / self.h
        kx, ky, kz = self.kvec
        cut = 2.0 / 3.0 * kmax
        return (np.abs(kx) < cut) & (np.abs(ky) < cut) & (np.abs(kz) < cut)

    def wrapped(self, center) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Minimum-image displacement x - center on the torus."""
        out = []
        for axis, c in enumerate(np.asarray(center, dtype=float)):
            d = self.coords[axis] - c
            out.append(d - 2.0 * self.L * np.round(d / (2.0 * self.L)))
        return tuple(out)

    def displacement(self, center) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """x - center shifted by whole periods chosen from the centre alone.

        Unlike ``wrapped`` this is continuous in the centre for |center_k| < L,
        at the price of a fixed jump at the box faces.
        """
        out = []
        for axis, c in enumerate(np.asarray(center, dtype=float)):
            out.append(self.coords[axis] - c + 2.0 * self.L * np.round(c / (2.0 * self.L)))
        return tuple(out)

    # ---------------------------------------------------------- spectral ops
    def laplacian(self, u: np.ndarray) -> np.ndarray:
        out = ifftn(-self.k2 * fftn(u))
        return out.real if np.isrealobj(u) else out

    def gradient(self, u: np.ndarray, axis: int) -> np.ndarray:
        k = self.kvec[axis]
        uh = fftn(u)
        if self.n % 2 == 0:
            # drop the Nyquist mode so real fields stay real
            k = np.where(np.abs(k) >= np.pi / self.h - 1e-12, 0.0, k)
        out = ifftn(1j * k * uh)
        return out.real if np.isrealobj(u) else out

    def shift(self, u: np.ndarray, d) -> np.ndarray:
        """Band-limited translation u(x - d)."""
        kx, ky, kz = self.kvec
        ph = np.exp(-1j * (kx * d[0] + ky * d[1] + kz * d[2]))
        out = ifftn(fftn(u) * ph)
        return out.real if np.isrealobj(u) else out

    def integrate(self, f: np.ndarray) -> complex:
        return np.sum(f) * self.dv

    def norm(self, u: np.ndarray, p: float = 2.0) -> float:
        a = np.abs(u)
        if np.isinf(p):
            return float(a.max())
        return float((np.sum(a ** p) * self.dv) ** (1.0 / p))

    def trig_interp_matrix(self, points: np.ndarray) -> np.ndarray:
        """Rows interpolate grid samples at arbitrary 1D points (periodic trig interpolant)."""
        n = self.n
        kap = np.pi / self.L
        d = points[:, None] - self.x1d[None, :]
        m = np.arange(1, n // 2)
        s = 1.0 + 2.0 * np.cos(kap * d[..., None] * m).sum(-1) + np.cos(kap * (n // 2) * d)
        return s / n

    def dilate(self, u: np.ndarray, s: float, shift) -> np.ndarray:
        """u(s(x - shift)) for a field u supported in the box.

        x - shift is the minimum image, so |s(x - shift)| <= sL. Points that
        land beyond the faces are tapered to zero between L and 1.1L, so that a
        contraction (s > 1) does not pull in periodic copies; the taper starts
        with zero slope and leaves the s-derivative at s = 1 untouched.
        """
        out = u
        for axis in range(3):
            d = self.x1d - shift[axis]
            p = s * (d - 2.0 * self.L * np.round(d / (2.0 * self.L)))
            over = np.clip((np.abs(p) - self.L) / (0.1 * self.L), 0.0, 1.0)
            mat = self.trig_interp_matrix(p) * (np.cos(0.5 * np.pi * over) ** 2)[:, None]
            out = np.moveaxis(np.tensordot(mat, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
        return out


@dataclass
class SpinorField:
    """A pair (z1, z2) of complex fields on a grid."""

    grid: Grid3D
    z1: np.ndarray
    z2: np.ndarray
    t: float = field(default=0.0)

    def __post_init__(self):
        self.z1 = np.asarray(self.z1, dtype=np.complex128)
        self.z2 = np.asarray(self.z2, dtype=np.complex128)
        if self.z1.shape != self.grid.shape or self.z2.shape != self.grid.shape:
            raise GridMismatch(f"field shapes {self.z1.shape}, {self.z2.shape} do not match grid {self.grid.shape}")

    @classmethod
    def from_scalar(cls, grid: Grid3D, r: np.ndarray) -> "SpinorField":
        """Z = (R, conj R)."""
        return cls(grid, r, np.conj(r))

    @classmethod
    def zeros(cls, grid: Grid3D) -> "SpinorField":
        return cls(grid, np.zeros(grid.shape, complex), np.zeros(grid.shape, complex))

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.z1.copy(), self.z2.copy(), self.t)

    def conjugacy_defect(self) -> float:
        scale = max(np.abs(self.z1).max(), 1e-300)
        return float(np.abs(self.z2 - np.conj(self.z1)).max() / scale)

    def flip(self) -> "SpinorField":
        """sigma_1 K: (z1, z2) -> (conj z2, conj z1)."""
        return SpinorField(self.grid, np.conj(self.z2), np.conj(self.z1), self.t)

    def sigma3(self) -> "SpinorField":
        return SpinorField(self.grid, self.z1, -self.z2, self.t)

    def conj(self) -> "SpinorField":
        return SpinorField(self.grid, np.conj(self.z1), np.conj(self.z2), self.t)

    def _check(self, other: "SpinorField"):
        if other.grid != self.grid:
            raise GridMismatch("spinor fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpinorField(self.grid, self.z1 + other.z1, self.z2 + other.z2, self.t)

    def __sub__(self, other):
        self._check(other)
        return SpinorField(self.grid, self.z1 - other.z1, self.z2 - other.z2, self.t)

    def __mul__(self, c):
        return SpinorField(self.grid, c * self.z1, c * self.z2, self.t)

    __rmul__ = __mul__

    def __neg__(self):
        return SpinorField(self.grid, -self.z1, -self.z2, self.t)

    def __truediv__(self, c):
        return SpinorField(self.grid, self.z1 / c, self.z2 / c, self.t)

    def inner(self, other: "SpinorField") -> complex:
        """<U, V> = int u1 conj(v1) + u2 conj(v2)."""
        self._check(other)
        return complex(np.vdot(other.z1, self.z1) + np.vdot(other.z2, self.z2)) * self.grid.dv

    def norm(self) -> float:
        return float(np.sqrt((np.vdot(self.z1, self.z1).real + np.vdot(self.z2, self.z2).real) * self.grid.dv))

    def sup(self) -> float:
        return float(max(np.abs(self.z1).max(), np.abs(self.z2).max()))

    def ravel(self) -> np.ndarray:
        return np.concatenate([self.z1.ravel(), self.z2.ravel()])

    @classmethod
    def unravel(cls, grid: Grid3D, v: np.ndarray, t: float = 0.0) -> "SpinorField":
        m = grid.n ** 3
        return cls(grid, v[:m].reshape(grid.shape), v[m:].reshape(grid.shape), t)


def inner(u: SpinorField, v: SpinorField) -> complex:
    return u.inner(v)
