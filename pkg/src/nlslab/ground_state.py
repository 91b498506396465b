"""Radial ground states of -Δφ + αφ = φ³, the scaling law, and lifts onto 3D grids."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import _kernels
from .errors import (ConfigInvalid, InterpolationOutOfRange, NoBracketing, NotConverged,
                     ProfileTooWide)
from .grid import Grid3D, fftn, ifftn

# sixth-order central stencils, offsets -3..3
_C2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
_C1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n_points: int = 8192

    def __post_init__(self):
        if self.n_points < 16 or not self.r_max > 0:
            raise ConfigInvalid("radial grid needs n_points >= 16 and r_max > 0")

    @property
    def dr(self) -> float:
        return self.r_max / (self.n_points - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_points)

    @classmethod
    def default(cls, alpha: float, n_points: int = 8192) -> "RadialGrid":
        return cls(30.0 / math.sqrt(alpha), n_points)


def _even_stencil_matrix(n: int, coeffs: np.ndarray, parity: int) -> sp.csr_matrix:
    """Banded matrix of a centered stencil with reflection u(-r_j) = parity * u(r_j) and zeros past r_max."""
    rows, cols, vals = [], [], []
    half = len(coeffs) // 2
    for j in range(n):
        for o, c in zip(range(-half, half + 1), coeffs):
            if c == 0.0:
                continue
            m = j + o
            sign = 1.0
            if m < 0:
                m = -m
                sign = float(parity)
            if m >= n:
                continue
            rows.append(j)
            cols.append(m)
            vals.append(sign * c)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def radial_operators(grid: RadialGrid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sixth-order (D1, Δ_r) on the radial nodes for even functions; Δ_r = D2 + (2/r) D1 and 3 D2 at r=0."""
    n, dr = grid.n_points, grid.dr
    d1 = _even_stencil_matrix(n, _C1, +1) / dr
    d2 = _even_stencil_matrix(n, _C2, +1) / dr ** 2
    r = grid.nodes
    inv = np.zeros(n)
    inv[1:] = 2.0 / r[1:]
    lap = (d2 + sp.diags(inv) @ d1).tolil()
    lap[0, :] = 3.0 * d2[0, :]
    return d1.tocsr(), lap.tocsr()


@dataclass(frozen=True)
class RadialProfile:
    grid: RadialGrid
    alpha: float
    values: np.ndarray
    d_r: np.ndarray
    d_alpha: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def central_value(self) -> float:
        return float(self.values[0])

    def mass(self) -> float:
        """||φ||_2^2 by r²-weighted trapezoid."""
        return float(4.0 * np.pi * np.trapezoid(self.values ** 2 * self.r ** 2, self.r))

    def residual(self) -> np.ndarray:
        _, lap = radial_operators(self.grid)
        v = self.values
        return -(lap @ v) + self.alpha * v - v ** 3

    def residual_norm(self, interior: int = 3) -> float:
        res = self.residual()
        return float(np.abs(res[: len(res) - interior]).max())

    def evaluate(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(φ, ∂_rφ) at arbitrary radii by cubic Hermite interpolation."""
        return _kernels.hermite(self.grid.dr, self.values, self.d_r, np.asarray(pts, dtype=float))

    def edge_ratio(self, radius: float) -> float:
        v, _ = self.evaluate(np.array([radius]))
        return float(abs(v[0]) / self.values[0])


def _classify(phi0: float, alpha: float, dr: float, r_end: float) -> int:
    code, _ = _kernels.shoot(phi0, alpha, dr, r_end)
    return code


def shoot_central_value(alpha: float, r_end: float | None = None, dr: float | None = None,
                        max_doublings: int = 12) -> float:
    """Bisection on φ(0) between undershoot (turns up) and overshoot (crosses zero)."""
    s = math.sqrt(alpha)
    r_end = 40.0 / s if r_end is None else r_end
    dr = 1e-3 / s if dr is None else dr
    lo = 0.5 * s
    if _classify(lo, alpha, dr, r_end) != -1:
        raise NoBracketing(f"low shooting height {lo} does not undershoot")
    hi = 2.0 * s
    for _ in range(max_doublings):
        if _classify(hi, alpha, dr, r_end) == 1:
            break
        lo_candidate = hi
        hi *= 2.0
        if _classify(lo_candidate, alpha, dr, r_end) == -1:
            lo = lo_candidate
    else:
        raise NoBracketing(f"no overshoot found up to φ(0) = {hi}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        code = _classify(mid, alpha, dr, r_end)
        if code == 1:
            hi = mid
        elif code == -1:
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def _shooting_guess(phi0: float, alpha: float, r: np.ndarray) -> np.ndarray:
    s = math.sqrt(alpha)
    r0 = 1e-6 / s
    c2 = (alpha * phi0 - phi0 ** 3) / 3.0

    def rhs(x, y):
        return [y[1], -2.0 / x * y[1] + alpha * y[0] - y[0] ** 3]

    def low(x, y):
        return y[0] - 1e-6 * phi0

    low.terminal = True

    def turn(x, y):
        return y[1]

    turn.terminal = True
    turn.direction = 1
    sol = solve_ivp(rhs, (r0, r[-1]), [phi0 + 0.5 * c2 * r0 ** 2, c2 * r0], method="DOP853",
                    rtol=1e-12, atol=1e-14 * phi0, dense_output=True, events=(low, turn))
    rc = sol.t[-1]
    out = np.empty_like(r)
    inside = r <= rc
    out[inside] = sol.sol(np.maximum(r[inside], r0))[0]
    phic = sol.sol(rc)[0]
    rr = r[~inside]
    out[~inside] = phic * (rc / rr) * np.exp(-s * (rr - rc))
    out[0] = phi0
    return out


def solve_ground_state(alpha: float, grid: RadialGrid | None = None, tol: float = 1e-9,
                       max_iter: int = 30) -> RadialProfile:
    """Positive radial solution of -Δφ + αφ = φ³: shooting bisection, then Newton on the collocation residual."""
    if not alpha > 0:
        raise ConfigInvalid(f"α must be positive, got {alpha}")
    if not tol > 0:
        raise ConfigInvalid(f"tol must be positive, got {tol}")
    grid = RadialGrid.default(alpha) if grid is None else grid
    phi0 = shoot_central_value(alpha)
    phi = _shooting_guess(phi0, alpha, grid.nodes)
    d1, lap = radial_operators(grid)
    eye = sp.identity(grid.n_points, format="csr")
    best = np.inf
    for _ in range(max_iter):
        res = lap @ phi - alpha * phi + phi ** 3
        rn = float(np.abs(res).max())
        if rn <= tol:
            break
        if rn > 0.5 * best and best < 1e-6:
            # roundoff floor reached without meeting tol
            raise NotConverged(f"radial residual stalled at {rn:.3e} > tol {tol:.1e}")
        best = min(best, rn)
        jac = (lap - alpha * eye + sp.diags(3.0 * phi ** 2)).tocsc()
        phi = phi - spla.spsolve(jac, res)
    else:
        raise NotConverged(f"radial Newton did not reach tol {tol:.1e}")
    dphi = d1 @ phi
    return RadialProfile(grid, float(alpha), phi, dphi, (phi + grid.nodes * dphi) / (2.0 * alpha))


def alpha_derivative(p: RadialProfile) -> np.ndarray:
    """∂_αφ = (φ + r ∂_rφ) / (2α), from the scaling law."""
    return (p.values + p.r * p.d_r) / (2.0 * p.alpha)


def rescale_profile(p: RadialProfile, alpha_to: float, edge_tol: float = 1e-10) -> RadialProfile:
    """φ_new(r) = s φ_old(s r) with s = (α_to/α_from)^{1/2}, sampled on the same grid."""
    if not alpha_to > 0:
        raise ConfigInvalid(f"α must be positive, got {alpha_to}")
    if alpha_to == p.alpha:
        return p
    s = math.sqrt(alpha_to / p.alpha)
    r = p.r
    v, d = p.evaluate(s * r)
    vals = s * v
    if s < 1.0 and abs(vals[-1]) > edge_tol * abs(vals[0]):
        raise InterpolationOutOfRange(
            f"rescaled profile is {abs(vals[-1] / vals[0]):.2e} of its peak at r_max={p.grid.r_max}")
    dr = s * s * d
    return RadialProfile(p.grid, float(alpha_to), vals, dr, (vals + r * dr) / (2.0 * alpha_to))


# ------------------------------------------------------------------ lifting

def _images(g: Grid3D, p: RadialProfile, periodic_images: bool):
    if not periodic_images:
        return [(0, 0, 0)]
    reach = p.grid.r_max
    # nodes on the face x_k = -L see the second shell unpaired, so keep it whenever the support reaches it
    shifts = [m for m in itertools.product(range(-2, 3), repeat=3)]
    # an image matters only if its nearest point in the box is within the support
    out = []
    for m in shifts:
        gap = [max(0.0, 2.0 * g.L * abs(mi) - g.L) for mi in m]
        if math.sqrt(sum(x * x for x in gap)) < reach:
            out.append(m)
    return out


@dataclass
class LiftedFamily:
    """φ, ∇φ, ∂_αφ and x_kφ sampled on a grid with periodic images summed.

    ``map_d_alpha`` is the α-derivative of the sampling map itself when that
    differs from the generalized-kernel vector ``d_alpha`` (None means equal).
    """

    phi: np.ndarray
    grad: tuple[np.ndarray, np.ndarray, np.ndarray]
    d_alpha: np.ndarray
    x_phi: tuple[np.ndarray, np.ndarray, np.ndarray]
    map_d_alpha: np.ndarray | None = None

    @property
    def tangent_alpha(self) -> np.ndarray:
        return self.d_alpha if self.map_d_alpha is None else self.map_d_alpha


def lift_family(p: RadialProfile, g: Grid3D, center=(0.0, 0.0, 0.0), periodic_images: bool = True,
                edge_tol: float = 1e-2) -> LiftedFamily:
    c = np.asarray(center, dtype=float)
    if p.edge_ratio(g.L) > edge_tol:
        raise ProfileTooWide(f"φ(L)/φ(0) = {p.edge_ratio(g.L):.2e} exceeds {edge_tol:.1e}; enlarge the box")
    X, Y, Z = g.coords
    phi = np.zeros(g.shape)
    grad = [np.zeros(g.shape) for _ in range(3)]
    dal = np.zeros(g.shape)
    xphi = [np.zeros(g.shape) for _ in range(3)]
    for m in _images(g, p, periodic_images):
        d = (X - c[0] - 2 * g.L * m[0], Y - c[1] - 2 * g.L * m[1], Z - c[2] - 2 * g.L * m[2])
        R = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        v, dv = p.evaluate(R)
        phi += v
        unit = np.where(R > 0, dv / np.where(R > 0, R, 1.0), 0.0)
        for k in range(3):
            grad[k] += unit * d[k]
            xphi[k] += d[k] * v
        dal += (v + R * dv) / (2.0 * p.alpha)
    return LiftedFamily(phi, tuple(grad), dal, tuple(xphi))


def lift_to_grid(p: RadialProfile, g: Grid3D, center=(0.0, 0.0, 0.0), periodic_images: bool = True,
                 edge_tol: float = 1e-2) -> np.ndarray:
    """φ(|x - center|) on the grid; on a periodic grid the periodic images are summed."""
    c = np.asarray(center, dtype=float)
    if p.edge_ratio(g.L) > edge_tol:
        raise ProfileTooWide(f"φ(L)/φ(0) = {p.edge_ratio(g.L):.2e} exceeds {edge_tol:.1e}; enlarge the box")
    X, Y, Z = g.coords
    out = np.zeros(g.shape)
    for m in _images(g, p, periodic_images):
        R = np.sqrt((X - c[0] - 2 * g.L * m[0]) ** 2 + (Y - c[1] - 2 * g.L * m[1]) ** 2
                    + (Z - c[2] - 2 * g.L * m[2]) ** 2)
        out += p.evaluate(R)[0]
    return out


# ------------------------------------------------------- grid ground state

@dataclass
class GridGroundState:
    """Discrete ground state of Δu - αu + u³ = 0 with the spectral Laplacian of the grid."""

    grid: Grid3D
    alpha: float
    field: np.ndarray
    residual: float
    iterations: int

    def mass(self) -> float:
        return float(np.sum(self.field ** 2) * self.grid.dv)


def grid_ground_state(alpha: float, g: Grid3D, guess: np.ndarray | None = None,
                      profile: RadialProfile | None = None, tol: float = 1e-12,
                      max_iter: int = 500) -> GridGroundState:
    """Petviashvili iteration seeded from the lifted radial profile."""
    if guess is None:
        p = profile if profile is not None else solve_ground_state(1.0, RadialGrid(30.0, 4096))
        if p.alpha != alpha:
            p = rescale_profile(p, alpha, edge_tol=np.inf)
        guess = lift_to_grid(p, g, edge_tol=np.inf)
    u = np.asarray(guess, dtype=float).copy()
    sym = alpha + g.k2
    for it in range(1, max_iter + 1):
        uh = fftn(u)
        nh = fftn(u ** 3)
        m = np.sum(sym * np.abs(uh) ** 2) / np.real(np.sum(np.conj(uh) * nh))
        un = ifftn(m ** 1.5 * nh / sym).real
        step = float(np.abs(un - u).max())
        u = un
        if step <= tol * np.abs(u).max():
            break
    else:
        raise NotConverged(f"grid ground state iteration stalled at step {step:.2e}")
    res = g.laplacian(u) - alpha * u + u ** 3
    return GridGroundState(g, float(alpha), u, float(np.abs(res).max()), it)
