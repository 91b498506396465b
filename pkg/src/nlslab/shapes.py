"""Soliton shape providers: φ(x - c, α) and its tangent fields on a periodic grid.

Two sources are supported. ``RadialShape`` lifts a radial profile (periodic
images summed). ``GridShape`` rescales and translates a discrete grid ground
state with the trigonometric interpolant, so that at its base parameters it
returns the discrete fixed point exactly.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse.linalg as spla

from .errors import GridMismatch, NotConverged
from .ground_state import (GridGroundState, LiftedFamily, RadialProfile, lift_family,
                           rescale_profile)
from .grid import Grid3D, fftn, ifftn


class SolitonShape:
    grid: Grid3D
    alpha0: float

    def family(self, center=(0.0, 0.0, 0.0), alpha: float | None = None) -> LiftedFamily:
        raise NotImplementedError

    def phi(self, center=(0.0, 0.0, 0.0), alpha: float | None = None) -> np.ndarray:
        return self.family(center, alpha).phi

    def mass(self, alpha: float | None = None) -> float:
        f = self.phi(alpha=alpha)
        return float(np.sum(f * f) * self.grid.dv)


class RadialShape(SolitonShape):
    def __init__(self, profile: RadialProfile, grid: Grid3D, edge_tol: float = 1e-2):
        self.profile = profile
        self.grid = grid
        self.alpha0 = profile.alpha
        self.edge_tol = edge_tol

    def family(self, center=(0.0, 0.0, 0.0), alpha=None) -> LiftedFamily:
        a = self.alpha0 if alpha is None else float(alpha)
        p = self.profile if a == self.alpha0 else rescale_profile(self.profile, a, edge_tol=np.inf)
        return lift_family(p, self.grid, center, edge_tol=self.edge_tol)


class GridShape(SolitonShape):
    def __init__(self, gs: GridGroundState):
        self.gs = gs
        self.grid = gs.grid
        self.alpha0 = gs.alpha
        self._cache: dict = {}
        self._dal0: np.ndarray | None = None

    def alpha_derivative(self, tol: float = 1e-12) -> np.ndarray:
        """∂_αφ at α₀ from L₊u = -φ, L₊ = -Δ + α₀ - 3φ², with the grid Laplacian.

        φ is even and the kernel of L₊ is odd, so the system is consistent; the
        result is the exact tangent of the discrete family, with no box-face kink.
        """
        if self._dal0 is not None:
            return self._dal0
        g = self.grid
        phi = self.gs.field
        sym = g.k2 + self.alpha0
        pot = 3.0 * phi ** 2
        n = phi.size

        def mv(u):
            u = u.reshape(g.shape)
            return (ifftn(sym * fftn(u)).real - pot * u).ravel()

        def prec(u):
            return ifftn(fftn(u.reshape(g.shape)) / sym).real.ravel()

        A = spla.LinearOperator((n, n), matvec=mv, dtype=float)
        M = spla.LinearOperator((n, n), matvec=prec, dtype=float)
        u, info = spla.minres(A, -phi.ravel(), M=M, rtol=tol, maxiter=2000)
        if info != 0:
            raise NotConverged(f"L₊ solve for the α-tangent stopped with info={info}")
        # A preserves parity and the Krylov space starts from the even φ, so no odd kernel part enters
        u = u.reshape(g.shape)
        self._dal0 = u
        return u

    def _sample(self, center, alpha: float) -> np.ndarray:
        g = self.grid
        c = np.asarray(center, dtype=float)
        if alpha == self.alpha0:
            if not np.any(c):
                return self.gs.field.copy()
            return g.shift(self.gs.field, c)
        s = math.sqrt(alpha / self.alpha0)
        return s * g.dilate(self.gs.field, s, c)

    def family(self, center=(0.0, 0.0, 0.0), alpha=None) -> LiftedFamily:
        a = self.alpha0 if alpha is None else float(alpha)
        key = (tuple(np.round(np.asarray(center, dtype=float), 15)), a)
        if key in self._cache:
            return self._cache[key]
        g = self.grid
        phi = self._sample(center, a)
        grad = tuple(g.gradient(phi, k) for k in range(3))
        c = np.asarray(center, dtype=float)
        dal0 = self.alpha_derivative()
        if a == self.alpha0:
            dal = dal0.copy() if not np.any(c) else g.shift(dal0, c)
        else:
            # ∂_αφ_α(x) = s⁻¹ (∂_αφ)_{α₀}(s(x - c)) for φ_α(x) = sφ_{α₀}(s(x - c))
            s = math.sqrt(a / self.alpha0)
            dal = g.dilate(dal0, s, c) / s
        # the sampling map itself is a dilation of φ_{α₀}; its α-derivative uses the
        # minimum-image displacement, matching the dilation
        d = g.wrapped(center)
        dmap = (phi + d[0] * grad[0] + d[1] * grad[1] + d[2] * grad[2]) / (2.0 * a)
        # x_kφ needs a multiplier continuous in the centre: the minimum image flips the
        # face nodes between -L and L as c_k crosses 0
        xd = g.displacement(center)
        fam = LiftedFamily(phi, grad, dal, tuple(dk * phi for dk in xd), dmap)
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = fam
        return fam


def check_same_grid(a: Grid3D, b: Grid3D):
    if a != b:
        raise GridMismatch(f"grid {a} does not match {b}")
