"""The linearized operator ℋ, its adjoint, the free part, the path split and L±.

Sign convention: the evolution is i∂_tZ + ℋZ = RHS, so ∂_tZ = i(ℋZ - RHS) and

    ℋ = [[Δ + 2|W|² - α,  W²            ],
         [-conj(W)²,      -Δ - 2|W|² + α]].

α = 0 gives the lab-frame operator of the Z equation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import ConfigInvalid, GridMismatch, PathNotConvergent
from .ground_state import RadialProfile, radial_operators
from .grid import Grid3D, SpinorField, fftn, ifftn


@dataclass
class LinearizedOperator:
    grid: Grid3D
    alpha: float
    W: np.ndarray

    def _check(self, U: SpinorField):
        if U.grid != self.grid:
            raise GridMismatch("field grid differs from operator grid")

    def _free(self, U: SpinorField) -> tuple[np.ndarray, np.ndarray]:
        sym = -self.grid.k2 - self.alpha
        return ifftn(sym * fftn(U.z1)), ifftn(-sym * fftn(U.z2))

    def apply_free(self, U: SpinorField) -> SpinorField:
        """ℋ₀ = diag(Δ - α, -Δ + α)."""
        self._check(U)
        a, b = self._free(U)
        return SpinorField(self.grid, a, b, U.t)

    def apply(self, U: SpinorField) -> SpinorField:
        self._check(U)
        a, b = self._free(U)
        p1, p2 = _kernels.potential_apply(self.W, U.z1, U.z2)
        return SpinorField(self.grid, a + p1, b + p2, U.t)

    def apply_adjoint(self, U: SpinorField) -> SpinorField:
        """ℋ* with respect to <U,V> = ∫ u1 conj(v1) + u2 conj(v2)."""
        self._check(U)
        a, b = self._free(U)
        m = np.abs(self.W) ** 2
        w2 = self.W ** 2
        return SpinorField(self.grid, a + 2 * m * U.z1 - w2 * U.z2, b + np.conj(w2) * U.z1 - 2 * m * U.z2, U.t)

    def potential(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        m = np.abs(self.W) ** 2
        w2 = self.W ** 2
        return 2 * m, w2, -np.conj(w2), -2 * m

    def potential_norm(self) -> np.ndarray:
        """Pointwise operator 2-norm of the 2x2 potential block."""
        m = np.abs(self.W) ** 2
        # |V| for [[2m, w²], [-conj w², -2m]] with |w²| = m is 3m
        return 3.0 * m


def assemble(W: np.ndarray, alpha: float, g: Grid3D) -> LinearizedOperator:
    W = np.asarray(W)
    if W.shape != g.shape:
        raise GridMismatch(f"soliton field shape {W.shape} does not match grid {g.shape}")
    if alpha < 0:
        raise ConfigInvalid("α must be non-negative")
    if not np.all(np.isfinite(W)):
        raise ConfigInvalid("soliton field is not finite")
    return LinearizedOperator(g, float(alpha), W.astype(np.complex128))


def apply(op: LinearizedOperator, U: SpinorField) -> SpinorField:
    return op.apply(U)


def apply_adjoint(op: LinearizedOperator, U: SpinorField) -> SpinorField:
    return op.apply_adjoint(U)


# ----------------------------------------------------------- scalar L±

@dataclass
class ScalarPair:
    """Radial L+ and L- with their sparse matrices."""

    plus: sp.csr_matrix
    minus: sp.csr_matrix
    convention: str

    def apply_plus(self, f: np.ndarray) -> np.ndarray:
        return self.plus @ f

    def apply_minus(self, f: np.ndarray) -> np.ndarray:
        return self.minus @ f


def scalar_L_pm(p: RadialProfile, convention: str = "standard") -> ScalarPair:
    """L± on the radial grid.

    ``standard``: L+ = -Δ + α - 3φ², L- = -Δ + α - φ² (L-φ = 0).
    ``as_written``: L± = -Δ + α - φ² ∓ 2φ², i.e. L- = -Δ + α + φ².
    """
    _, lap = radial_operators(p.grid)
    base = -lap + p.alpha * sp.identity(p.grid.n_points)
    q = p.values ** 2
    if convention == "standard":
        return ScalarPair((base - sp.diags(3 * q)).tocsr(), (base - sp.diags(q)).tocsr(), convention)
    if convention == "as_written":
        return ScalarPair((base - sp.diags(3 * q)).tocsr(), (base + sp.diags(q)).tocsr(), convention)
    raise ConfigInvalid(f"unknown L± convention {convention!r}")


# ------------------------------------------------------------ path split

@dataclass
class PathOperatorSplit:
    base: LinearizedOperator
    V: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    t: float

    def apply_correction(self, U: SpinorField) -> SpinorField:
        a, b, c, d = self.V
        return SpinorField(U.grid, a * U.z1 + b * U.z2, c * U.z1 + d * U.z2, U.t)

    def apply(self, U: SpinorField) -> SpinorField:
        """ℋ = ℋ_{π⁰} - V_{π⁰}; V sits on the right of iU_t + ℋ_{π⁰}U = V U + ..."""
        return self.base.apply(U) - self.apply_correction(U)

    def sup_norm(self) -> float:
        a, b, c, d = self.V
        return float(max(np.abs(a).max(), np.abs(b).max(), np.abs(c).max(), np.abs(d).max()))


def path_split(path, t: float, shape) -> PathOperatorSplit:
    """Constant part at φ∞ = φ(·, α∞) plus the pointwise correction V_{π⁰}(t)."""
    frame = path.asymptotic_frame()
    st = path.state_at(t)
    if st.alpha <= 0 or frame.alpha_inf <= 0:
        raise PathNotConvergent("α(t) must stay positive along the path")
    g = shape.grid
    phi_inf = shape.phi(alpha=frame.alpha_inf)
    y = st.y
    y_inf = frame.y_inf(t)
    phi_t = shape.phi(center=np.asarray(y) - np.asarray(y_inf), alpha=st.alpha)
    rho = frame.rho(t, g)
    q_inf = phi_inf ** 2
    q = phi_t ** 2
    V = (2 * (q_inf - q) + 0j, q_inf - np.exp(2j * rho) * q, -q_inf + np.exp(-2j * rho) * q,
         -2 * (q_inf - q) + 0j)
    base = assemble(phi_inf, frame.alpha_inf, g)
    return PathOperatorSplit(base, V, float(t))


def nonlinearity(Z: SpinorField, W: np.ndarray) -> SpinorField:
    """N^Z(Z, π) = (-2|z1|²W - conj(W) z1² - |z1|²z1, 2|z2|² conj(W) + W z2² + |z2|² z2)."""
    a, b = _kernels.nonlinearity_z(W, Z.z1, Z.z2)
    return SpinorField(Z.grid, a, b, Z.t)


OperatorApplier = Callable[[SpinorField], SpinorField]
