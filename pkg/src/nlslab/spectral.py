"""Discrete spectrum of ℋ at a ground state: null-space families, the ±iσ pair and Riesz projections.

The unstable pair is computed through the real symmetric reduction. Writing
p = f1 + f2 and q = f1 - f2 the eigenproblem ℋf = λf becomes

    λp = -L₋q,   λq = -L₊p,

so p = L₋y solves the generalized symmetric problem L₋L₊L₋ y = λ² (L₋ + α P_φ) y
whose only negative eigenvalue is λ² = -σ². P_φ lifts the kernel of L₋ without
moving the negative eigenvalue.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ConfigInvalid, GridMismatch, IllConditionedGram, NotFound, ToleranceUnmet
from .grid import Grid3D, SpinorField, fftn, ifftn
from .ground_state import RadialProfile
from .hamiltonian import LinearizedOperator
from .modulation import FAMILY, SolitonParams, static_families
from .shapes import RadialShape, SolitonShape


@dataclass
class NullSpaceBasis:
    grid: Grid3D
    alpha: float
    eta: dict
    xi: dict
    mass: float

    def gram(self) -> np.ndarray:
        """B[F, G] = ⟨η_F, ξ_G⟩ in FAMILY order."""
        return np.array([[self.eta[F].inner(self.xi[G]) for G in FAMILY] for F in FAMILY])


def build_null_basis(source, g: Grid3D | None = None) -> NullSpaceBasis:
    """η_F and ξ_F = iσ₃η_F at θ = 0, y = 0 from a radial profile or a soliton shape."""
    if isinstance(source, RadialProfile):
        if g is None:
            raise ConfigInvalid("a grid is required to lift a radial profile")
        shape: SolitonShape = RadialShape(source, g)
    else:
        shape = source
        if g is not None and g != shape.grid:
            raise GridMismatch("shape grid differs from the requested grid")
    fam = static_families(shape, SolitonParams(alpha=shape.alpha0), with_phase=False)
    return NullSpaceBasis(shape.grid, shape.alpha0, fam.eta, fam.xi, fam.mass)


# --------------------------------------------------------- unstable pair

@dataclass
class SpectralData:
    alpha: float
    sigma: float
    f_plus: SpinorField
    f_minus: SpinorField
    ft_plus: SpinorField
    ft_minus: SpinorField
    residual: float
    iterations: int
    decay_rate: float = float("nan")

    @property
    def eigenvalue_plus(self) -> complex:
        """ℋf⁺ = -iσf⁺, so e^{itℋ}f⁺ = e^{σt}f⁺."""
        return -1j * self.sigma


def _real_ground_state(op: LinearizedOperator) -> np.ndarray:
    W = op.W
    scale = np.abs(W).max()
    if np.abs(W.imag).max() > 1e-10 * scale:
        raise ConfigInvalid("unstable_pair needs a real ground state field (static frame)")
    return W.real.copy()


def unstable_pair(op: LinearizedOperator, basis: NullSpaceBasis | None = None, eig_tol: float = 1e-6,
                  lobpcg_tol: float = 1e-10, max_iter: int = 400, seed: int = 0) -> SpectralData:
    g = op.grid
    if basis is not None and (basis.grid != g):
        raise GridMismatch("basis and operator grids differ")
    phi = _real_ground_state(op)
    a = op.alpha
    if a <= 0:
        raise ConfigInvalid("α must be positive for the unstable pair")
    q2 = phi * phi
    k2 = g.k2
    shp = g.shape
    n3 = phi.size
    u = phi.ravel() / np.linalg.norm(phi)

    def mlap(v):
        return ifftn(k2 * fftn(v)).real

    def Lp(v):
        return mlap(v) + a * v - 3 * q2 * v

    def Lm(v):
        return mlap(v) + a * v - q2 * v

    def columns(fn):
        def op_(V):
            V = V.reshape(n3, -1)
            out = np.empty_like(V)
            for j in range(V.shape[1]):
                out[:, j] = fn(V[:, j])
            return out
        return op_

    A = spla.LinearOperator((n3, n3), matvec=columns(lambda v: Lm(Lp(Lm(v.reshape(shp)))).ravel()),
                            matmat=columns(lambda v: Lm(Lp(Lm(v.reshape(shp)))).ravel()), dtype=float)
    bfun = lambda v: Lm(v.reshape(shp)).ravel() + a * u * (u @ v)
    B = spla.LinearOperator((n3, n3), matvec=columns(bfun), matmat=columns(bfun), dtype=float)
    pre = 1.0 / (k2 + a) ** 3
    tfun = lambda v: ifftn(fftn(v.reshape(shp)) * pre).real.ravel()
    T = spla.LinearOperator((n3, n3), matvec=columns(tfun), matmat=columns(tfun), dtype=float)

    rng = np.random.default_rng(seed)
    x0 = (np.exp(-math.sqrt(a) * g.radius) * (1.0 + 1e-3 * rng.standard_normal(shp))).ravel()[:, None]
    with warnings.catch_warnings():
        # the postprocessing accuracy warning is superseded by the residual check below
        warnings.simplefilter("ignore", UserWarning)
        w, V, hist = spla.lobpcg(A, x0, B=B, M=T, tol=lobpcg_tol, maxiter=max_iter, largest=False,
                                 retResidualNormsHistory=True)
    mu = float(w[0])
    if not mu < 0:
        raise NotFound(f"no negative λ² found (smallest {mu:.3e}); no imaginary pair isolated")
    sigma = math.sqrt(-mu)
    p = Lm(V[:, 0].reshape(shp))
    q = -1j * Lp(p) / sigma
    f1 = 0.5 * (p + q)
    if np.sum(p * phi) < 0:
        f1 = -f1
    fp = SpinorField.from_scalar(g, f1)
    fp = fp / fp.norm()
    fm = fp.conj()
    res_vec = op.apply(fp) + fp * (1j * sigma)
    residual = res_vec.norm()
    if residual > eig_tol:
        raise ToleranceUnmet(f"eigen-residual {residual:.2e} exceeds {eig_tol:.1e}")
    c = fp.inner(fm.sigma3())
    ft_plus = fm.sigma3() / np.conj(c)
    c2 = fm.inner(fp.sigma3())
    ft_minus = fp.sigma3() / np.conj(c2)
    data = SpectralData(a, sigma, fp, fm, ft_plus, ft_minus, residual, len(hist))
    data.decay_rate = decay_rate_fit(fp, a)
    return data


def decay_rate_fit(f: SpinorField, alpha: float, r_lo: float | None = None, r_hi: float | None = None) -> float:
    """Rate c in |f(x)| ≈ Ce^{-c|x|} from a log-linear fit of radial shell maxima."""
    g = f.grid
    r = g.radius
    amp = np.maximum(np.abs(f.z1), np.abs(f.z2))
    r_lo = 2.0 / math.sqrt(alpha) if r_lo is None else r_lo
    r_hi = 0.8 * g.L if r_hi is None else r_hi
    edges = np.arange(r_lo, r_hi + g.h, g.h)
    if len(edges) < 4:
        return float("nan")
    idx = np.digitize(r.ravel(), edges)
    flat = amp.ravel()
    rs, ms = [], []
    for i in range(1, len(edges)):
        sel = idx == i
        if sel.any():
            rs.append(0.5 * (edges[i - 1] + edges[i]))
            ms.append(flat[sel].max())
    slope = np.polyfit(np.array(rs), np.log(np.maximum(ms, 1e-300)), 1)[0]
    return float(-slope)


def radial_sigma(p: RadialProfile, n: int = 800, r_max: float | None = None) -> float:
    """σ restricted to radial functions: 4th-order finite differences for u = r f on (0, r_max)."""
    a = p.alpha
    R = 12.0 / math.sqrt(a) if r_max is None else r_max
    h = R / (n + 1)
    r = h * np.arange(1, n + 1)
    phi, _ = p.evaluate(r)
    q2 = phi * phi
    # -d²/dr² with Dirichlet ends; u is odd about r = 0
    D2 = np.zeros((n, n))
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    for i in range(n):
        for j, cj in zip(range(i - 2, i + 3), c):
            if 0 <= j < n:
                D2[i, j] += cj
            elif j == -2:
                D2[i, 0] -= cj
    base = -D2 + a * np.eye(n)
    Lp = base - np.diag(3 * q2)
    Lm = base - np.diag(q2)
    w = sla.eigvals(Lm @ Lp)
    neg = w.real[(np.abs(w.imag) < 1e-8 * np.abs(w).max()) & (w.real < 0)]
    if neg.size == 0:
        raise NotFound("no negative eigenvalue of L₋L₊ in the radial sector")
    return float(math.sqrt(-neg.min()))


# ----------------------------------------------------------- projections

@dataclass
class ProjectionSet:
    Q: list
    R: list
    G_inv: np.ndarray
    cond: float
    null_slice: slice = slice(0, 8)

    def coefficients(self, U: SpinorField) -> np.ndarray:
        return self.G_inv @ np.array([U.inner(r) for r in self.R])

    def _combine(self, c: np.ndarray, idx) -> SpinorField:
        out = SpinorField.zeros(self.Q[0].grid)
        for j in idx:
            out = out + self.Q[j] * c[j]
        out.t = 0.0
        return out

    def P_root(self, U: SpinorField) -> SpinorField:
        return self._combine(self.coefficients(U), range(8))

    def P_plus(self, U: SpinorField) -> SpinorField:
        return self._combine(self.coefficients(U), [8])

    def P_minus(self, U: SpinorField) -> SpinorField:
        return self._combine(self.coefficients(U), [9])

    def P_c(self, U: SpinorField) -> SpinorField:
        c = self.coefficients(U)
        return U - self._combine(c, range(10))

    def P_c_adjoint(self, U: SpinorField) -> SpinorField:
        """P_c* = I - Σ R_i (G⁻¹)* ⟨U, Q_j⟩."""
        c = self.G_inv.conj().T @ np.array([U.inner(q) for q in self.Q])
        out = U.copy()
        for i, r in enumerate(self.R):
            out = out - r * c[i]
        return out

    def b_plus(self, U: SpinorField) -> complex:
        return self.coefficients(U)[8]

    def b_minus(self, U: SpinorField) -> complex:
        return self.coefficients(U)[9]


def riesz_projections(basis: NullSpaceBasis, pair: SpectralData, max_cond: float = 1e6) -> ProjectionSet:
    if basis.grid != pair.f_plus.grid:
        raise GridMismatch("basis and spectral data live on different grids")
    if abs(basis.alpha - pair.alpha) > 1e-12 * max(1.0, basis.alpha):
        raise ConfigInvalid("basis and spectral data have different α")
    Q = [basis.eta[F] for F in FAMILY] + [pair.f_plus, pair.f_minus]
    R = [basis.xi[F] for F in FAMILY] + [pair.ft_plus, pair.ft_minus]
    # G[i, j] = ⟨Q_j, R_i⟩ so that U = Σ Q_j c_j gives ⟨U, R_i⟩ = Σ_j G_ij c_j
    G = np.array([[Q[j].inner(R[i]) for j in range(10)] for i in range(10)])
    cond = float(np.linalg.cond(G))
    if not cond <= max_cond:
        raise IllConditionedGram(f"biorthogonality matrix condition {cond:.2e} exceeds {max_cond:.1e}")
    return ProjectionSet(Q, R, np.linalg.inv(G), cond)


def project(ps: ProjectionSet, U: SpinorField) -> dict:
    c = ps.coefficients(U)
    root = ps._combine(c, range(8))
    plus = ps._combine(c, [8])
    minus = ps._combine(c, [9])
    cont = U - root - plus - minus
    return {"U_c": cont, "U_root": root, "U_plus": plus, "U_minus": minus}


def spectral_report(basis: NullSpaceBasis, pair: SpectralData, extra: dict | None = None) -> dict:
    B = basis.gram()
    rep = {
        "alpha": pair.alpha,
        "sigma": pair.sigma,
        "sigma_over_alpha": pair.sigma / pair.alpha,
        "residuals": {"eigen": pair.residual},
        "biorthogonality_matrix": {"order": list(FAMILY), "real": B.real.tolist(), "imag": B.imag.tolist()},
        "decay_rate_fit": pair.decay_rate,
        "mass": basis.mass,
    }
    if extra:
        rep.update(extra)
    return rep


def dump_report(rep: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep, fh, indent=2)
