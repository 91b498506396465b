"""Moving solitons, symmetry transforms, ξ/η families and modulation of π.

Parameter vectors are ordered (Γ, v1, v2, v3, D1, D2, D3, α). Families
are ordered (α, Γ, v1, v2, v3, D1, D2, D3).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigInvalid, NewtonDiverged, SingularJacobian, SolitonLeftBox,
                     SupportOverflow, TailNotConverged)
from .grid import Grid3D, SpinorField, fftn, ifftn
from .shapes import SolitonShape

PARAM_NAMES = ("Gamma", "v1", "v2", "v3", "D1", "D2", "D3", "alpha")
FAMILY = ("alpha", "Gamma", "v1", "v2", "v3", "D1", "D2", "D3")


@dataclass
class SolitonParams:
    Gamma: float = 0.0
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    D: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha: float = 1.0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.D = np.asarray(self.D, dtype=float).reshape(3)
        if not self.alpha > 0:
            raise ConfigInvalid(f"α must be positive, got {self.alpha}")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.Gamma], self.v, self.D, [self.alpha]])

    @classmethod
    def from_vector(cls, x) -> "SolitonParams":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), x[1:4], x[4:7], float(x[7]))

    def scale(self) -> np.ndarray:
        """Natural units used to measure Newton steps."""
        s = math.sqrt(self.alpha)
        return np.array([1.0, s, s, s, 1 / s, 1 / s, 1 / s, self.alpha])


# ----------------------------------------------------------- families

@dataclass
class Families:
    """ξ_F, η_F and the tangent vectors ∂_π(W, conj W) at one parameter point."""

    grid: Grid3D
    params: SolitonParams
    W: np.ndarray
    xi: dict
    eta: dict
    tangent: dict
    mass: float

    def spinor_W(self) -> SpinorField:
        return SpinorField.from_scalar(self.grid, self.W)



def static_families(shape: SolitonShape, params: SolitonParams, with_phase: bool = True) -> Families:
    """Families at W(π)(x) = e^{i(Γ + v·x)} φ(x - D, α), with x_k replaced by (x - D)_k in ξ_D."""
    g = shape.grid
    fam = shape.family(center=params.D, alpha=params.alpha)
    X = g.coords
    theta = params.Gamma + params.v[0] * X[0] + params.v[1] * X[1] + params.v[2] * X[2]
    ph = np.exp(1j * theta) if with_phase else np.ones(g.shape, complex)
    W = ph * fam.phi

    def sym(a):
        return SpinorField(g, a, np.conj(a))

    xi = {"alpha": sym(ph * fam.phi), "Gamma": sym(1j * ph * fam.d_alpha)}
    for k in range(3):
        xi[f"v{k + 1}"] = sym(1j * ph * fam.grad[k])
        xi[f"D{k + 1}"] = sym(ph * fam.x_phi[k])
    eta = {F: SpinorField(g, -1j * s.z1, 1j * s.z2) for F, s in xi.items()}
    tangent = {"Gamma": sym(1j * W), "alpha": sym(ph * fam.tangent_alpha)}
    for k in range(3):
        tangent[f"v{k + 1}"] = sym(1j * X[k] * W)
        tangent[f"D{k + 1}"] = sym(-ph * fam.grad[k])
    mass = float(np.sum(fam.phi ** 2) * g.dv)
    return Families(g, params, W, xi, eta, tangent, mass)


def moving_soliton_field(shape: SolitonShape, params: SolitonParams) -> np.ndarray:
    return static_families(shape, params).W


# --------------------------------------------------------------- paths

@dataclass
class PathSample:
    t: float
    Gamma: float
    v: np.ndarray
    D: np.ndarray
    alpha: float
    y: np.ndarray
    theta0: float
    gamma: float


@dataclass
class AsymptoticFrame:
    Gamma_inf: float
    v_inf: np.ndarray
    D_inf: np.ndarray
    alpha_inf: float
    gamma_inf: float
    path: "PathState"

    def y_inf(self, t: float) -> np.ndarray:
        return 2.0 * t * self.v_inf + self.D_inf

    def theta_inf(self, t: float, X) -> np.ndarray:
        return (self.Gamma_inf + self.v_inf[0] * X[0] + self.v_inf[1] * X[1] + self.v_inf[2] * X[2]
                - t * (self.v_inf @ self.v_inf - self.alpha_inf))

    def rho(self, t: float, g: Grid3D) -> np.ndarray:
        """ρ∞(t, x) = θ(t, x + y∞) - θ∞(t, x + y∞)."""
        yi = self.y_inf(t)
        X = tuple(g.coords[k] + yi[k] for k in range(3))
        return self.path.theta(t, X) - self.theta_inf(t, X)


class PathState:
    """Piecewise-linear samples of π(t) with trapezoid-accumulated integrals.

    Beyond the last sample the path is held constant.
    """

    def __init__(self, times, params, rates=None, tail_tol: float = 1e-10):
        self.times = np.asarray(times, dtype=float)
        self.params = np.atleast_2d(np.asarray(params, dtype=float))
        if self.params.shape != (len(self.times), 8):
            raise ConfigInvalid("path samples must have shape (n_times, 8)")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ConfigInvalid("path times must be strictly increasing")
        if np.any(self.params[:, 7] <= 0):
            raise ConfigInvalid("α(t) must stay positive along the path")
        if rates is None:
            rates = (np.gradient(self.params, self.times, axis=0) if len(self.times) > 1
                     else np.zeros_like(self.params))
        self.rates = np.asarray(rates, dtype=float)
        self.tail_tol = tail_tol
        v = self.params[:, 1:4]
        a = self.params[:, 7]
        self._cum_v = self._cumtrap(v)
        self._cum_phase = self._cumtrap((np.sum(v * v, axis=1) - a)[:, None])[:, 0]
        self._cum_moment = self._cumtrap(2.0 * self.times[:, None] * self.rates[:, 1:4])

    @classmethod
    def constant(cls, params: SolitonParams, horizon: float = 1.0) -> "PathState":
        x = params.to_vector()
        return cls([0.0, horizon], [x, x], np.zeros((2, 8)))

    def _cumtrap(self, f: np.ndarray) -> np.ndarray:
        out = np.zeros_like(f)
        if len(self.times) > 1:
            dt = np.diff(self.times)[:, None]
            out[1:] = np.cumsum(0.5 * dt * (f[1:] + f[:-1]), axis=0)
        return out

    def _interp(self, t: float, arr: np.ndarray) -> np.ndarray:
        if len(self.times) == 1:
            return arr[0]
        t = min(max(t, self.times[0]), self.times[-1])
        return np.array([np.interp(t, self.times, arr[:, j]) for j in range(arr.shape[1])])

    def params_at(self, t: float) -> np.ndarray:
        return self._interp(t, self.params)

    def rates_at(self, t: float) -> np.ndarray:
        if t > self.times[-1]:
            return np.zeros(8)
        return self._interp(t, self.rates)

    def _int_v(self, t: float) -> np.ndarray:
        T = self.times[-1]
        base = self._interp(t, self._cum_v)
        if t > T:
            base = self._cum_v[-1] + (t - T) * self.params[-1, 1:4]
        return base

    def _int_phase(self, t: float) -> float:
        T = self.times[-1]
        if t > T:
            v = self.params[-1, 1:4]
            return float(self._cum_phase[-1] + (t - T) * (v @ v - self.params[-1, 7]))
        return float(np.interp(t, self.times, self._cum_phase)) if len(self.times) > 1 else 0.0

    def _tail_speed_moment(self, t: float) -> np.ndarray:
        """∫_t^∞ 2 s v̇(s) ds (vector), trapezoid on the samples, interpolated between them."""
        if t >= self.times[-1]:
            return np.zeros(3)
        return self._cum_moment[-1] - self._interp(t, self._cum_moment)

    def gamma(self, t: float) -> float:
        """γ(t) = Γ(t) - (v(t) - v∞)·D∞ + ∫_t^∞ 2s v̇(s)·v∞ ds."""
        p = self.params_at(t)
        v_inf = self.params[-1, 1:4]
        D_inf = self._D_inf()
        return float(p[0] - (p[1:4] - v_inf) @ D_inf + self._tail_speed_moment(t) @ v_inf)

    def _D_inf(self) -> np.ndarray:
        v_inf = self.params[-1, 1:4]
        T = self.times[-1]
        return self.params[-1, 4:7] - 2.0 * (T * v_inf - self._cum_v[-1])

    def y(self, t: float) -> np.ndarray:
        """y(t) = 2∫_0^t v + D(t)."""
        return 2.0 * self._int_v(t) + self.params_at(t)[4:7]

    def theta(self, t: float, X) -> np.ndarray:
        p = self.params_at(t)
        return p[1] * X[0] + p[2] * X[1] + p[3] * X[2] - self._int_phase(t) + self.gamma(t)

    def state_at(self, t: float) -> PathSample:
        p = self.params_at(t)
        return PathSample(t, float(p[0]), p[1:4], p[4:7], float(p[7]), self.y(t),
                          -self._int_phase(t), self.gamma(t))

    def check_tail(self):
        last = np.abs(self.rates[-1]).max() * max(1.0, self.times[-1])
        if last > self.tail_tol:
            raise TailNotConverged(f"⟨t⟩|π̇| = {last:.2e} at the horizon exceeds {self.tail_tol:.1e}")

    def asymptotic_frame(self, check: bool = False) -> AsymptoticFrame:
        if check:
            self.check_tail()
        v_inf = self.params[-1, 1:4].copy()
        a_inf = float(self.params[-1, 7])
        gam_inf = self.gamma(self.times[-1])
        v = self.params[:, 1:4]
        a = self.params[:, 7]
        integrand = (v_inf @ v_inf - np.sum(v * v, axis=1) - a_inf + a)
        integral = (float(np.sum(0.5 * np.diff(self.times) * (integrand[1:] + integrand[:-1])))
                    if len(self.times) > 1 else 0.0)
        # the sign that makes θ(t, x) - θ∞(t, x) vanish as t → ∞
        return AsymptoticFrame(gam_inf + integral, v_inf, self._D_inf(), a_inf, gam_inf, self)

    def nu(self, T: float) -> float:
        """ν(T) = ‖⟨t⟩π̇‖_{L¹(T,∞)} + ‖π̇‖_{L∞(T,∞)} on the samples."""
        mask = self.times >= T
        if not mask.any():
            return 0.0
        ts = self.times[mask]
        sp = np.linalg.norm(self.rates[mask], axis=1)
        f = np.sqrt(1.0 + ts ** 2) * sp
        l1 = float(np.sum(0.5 * np.diff(ts) * (f[1:] + f[:-1]))) if len(ts) > 1 else 0.0
        return l1 + float(sp.max())

    def velocity_tail_checks(self, T: float) -> dict:
        """Quantities bounded by ν(T) in the path estimates."""
        v_inf = self.params[-1, 1:4]
        mask = self.times >= T
        ts = self.times[mask]
        dv = np.linalg.norm(self.params[mask, 1:4] - v_inf, axis=1)
        tv = ts * np.linalg.norm(self.rates[mask, 1:4], axis=1)
        trap = lambda f: float(np.sum(0.5 * np.diff(ts) * (f[1:] + f[:-1]))) if len(ts) > 1 else 0.0
        vT = np.linalg.norm(self.params_at(T)[1:4] - v_inf)
        return {"int_dv": trap(dv), "T_dv": float(T * vT), "t_vdot_l1": trap(tv), "nu": self.nu(T)}

    def to_rows(self):
        for i, t in enumerate(self.times):
            yield [t, *self.params[i], *self.rates[i], self.nu(t)]


def moving_soliton(ps: PathState, t: float, shape: SolitonShape) -> np.ndarray:
    """W(π(t))(x) = e^{iθ(t,x)} φ(x - y(t), α(t))."""
    st = ps.state_at(t)
    g = shape.grid
    y = st.y
    if np.any(np.abs(y) > g.L):
        raise SolitonLeftBox(f"soliton centre {y} left the box [-{g.L}, {g.L})")
    phi = shape.phi(center=y, alpha=st.alpha)
    return np.exp(1j * ps.theta(t, g.coords)) * phi


# ---------------------------------------------------- symmetry transforms

def symmetry_transform(Gamma: float, v, D, alpha_scale: float, t: float, f: np.ndarray,
                       g: Grid3D, support_tol: float = 1e-3) -> np.ndarray:
    """e^{i(Γ + v·x - t|v|²)} α^{1/2} f(α^{1/2}(x - 2tv - D)) on the grid.

    ``f`` holds samples of f(·, αt) at the grid nodes; the transform moves and
    dilates it with the trigonometric interpolant.
    """
    v = np.asarray(v, dtype=float)
    D = np.asarray(D, dtype=float)
    s = math.sqrt(alpha_scale)
    shift = 2 * t * v + D
    f = np.asarray(f, dtype=complex)
    if s < 1.0:
        edge = np.abs(f).copy()
        inner = int(round(g.n * s / 2))
        lo, hi = g.n // 2 - inner, g.n // 2 + inner
        edge[lo:hi, lo:hi, lo:hi] = 0.0
        if edge.max() > support_tol * max(np.abs(f).max(), 1e-300):
            raise SupportOverflow("dilated field does not fit in the box")
    if s == 1.0:
        out = g.shift(f, shift)
    else:
        out = g.dilate(f, s, shift)
    X = g.coords
    phase = Gamma + v[0] * X[0] + v[1] * X[1] + v[2] * X[2] - t * (v @ v)
    return np.exp(1j * phase) * s * out


def symmetry_transform_spinor(Gamma, v, D, alpha_scale, t, U: SpinorField) -> SpinorField:
    """𝔤 acting as (𝒢 u1, conj(𝒢 conj(u2)))."""
    g = U.grid
    a = symmetry_transform(Gamma, v, D, alpha_scale, t, U.z1, g)
    b = np.conj(symmetry_transform(Gamma, v, D, alpha_scale, t, np.conj(U.z2), g))
    return SpinorField(g, a, b, U.t)


# -------------------------------------------------------- fit modulation

@dataclass
class ModulationFit:
    params: SolitonParams
    residuals: np.ndarray
    iterations: int
    Z: SpinorField
    families: Families


def _pairings(Z: SpinorField, fam: Families) -> np.ndarray:
    return np.array([Z.inner(fam.xi[F]).real for F in FAMILY])


def fit_modulation(psi: np.ndarray, guess: SolitonParams, shape: SolitonShape, fit_tol: float = 1e-11,
                   max_iter: int = 30, basin: float = 0.5, with_phase: bool = True) -> ModulationFit:
    """Newton on ⟨Ψ - W(π), ξ_F(π)⟩ = 0 with Jacobian -⟨∂_πW, ξ_F⟩."""
    g = shape.grid
    x = guess.to_vector()
    norms = None
    for it in range(max_iter + 1):
        p = SolitonParams.from_vector(x)
        fam = static_families(shape, p, with_phase)
        Z = SpinorField.from_scalar(g, psi - fam.W)
        r = _pairings(Z, fam)
        if norms is None:
            norms = np.array([fam.xi[F].norm() for F in FAMILY])
        scaled = np.abs(r) / norms
        if scaled.max() <= fit_tol * max(1.0, float(np.sqrt(fam.mass))):
            return ModulationFit(p, r, it, Z, fam)
        if it == max_iter:
            break
        J = np.empty((8, 8))
        for j, name in enumerate(PARAM_NAMES):
            T = fam.tangent[name]
            for i, F in enumerate(FAMILY):
                J[i, j] = -T.inner(fam.xi[F]).real
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite Newton step")
        if it == 0 and np.abs(step / p.scale()).max() > basin:
            raise NewtonDiverged(f"first Newton step {np.abs(step / p.scale()).max():.2f} exceeds basin {basin}")
        x = x + step
        if x[7] <= 0:
            raise NewtonDiverged("α became non-positive")
    raise NewtonDiverged(f"fit did not reach tol after {max_iter} iterations (max scaled residual {scaled.max():.2e})")


def nls_time_derivative(psi: np.ndarray, g: Grid3D, frame_alpha: float = 0.0) -> np.ndarray:
    """ψ_t = i(Δψ - aψ + |ψ|²ψ) in a frame rotating at frequency a."""
    return 1j * (g.laplacian(psi) - frame_alpha * psi + np.abs(psi) ** 2 * psi)


def modulation_rates(psi: np.ndarray, params: SolitonParams, shape: SolitonShape, psi_t: np.ndarray | None = None,
                     frame_alpha: float = 0.0, include_curvature: bool = True, fd_step: float = 1e-5) -> np.ndarray:
    """π̇ keeping ⟨Z, ξ_F(π)⟩ = 0 along the exact flow: M π̇ = ⟨Ψ_t, ξ_F⟩."""
    g = shape.grid
    fam = static_families(shape, params)
    if psi_t is None:
        psi_t = nls_time_derivative(psi, g, frame_alpha)
    Pt = SpinorField.from_scalar(g, psi_t)
    Z = SpinorField.from_scalar(g, psi - fam.W)
    b = np.array([Pt.inner(fam.xi[F]).real for F in FAMILY])
    M = np.empty((8, 8))
    for j, name in enumerate(PARAM_NAMES):
        for i, F in enumerate(FAMILY):
            M[i, j] = fam.tangent[name].inner(fam.xi[F]).real
    if include_curvature:
        x = params.to_vector()
        sc = params.scale()
        for j in range(8):
            dx = np.zeros(8)
            dx[j] = fd_step * sc[j]
            fp = static_families(shape, SolitonParams.from_vector(x + dx))
            fm = static_families(shape, SolitonParams.from_vector(x - dx))
            for i, F in enumerate(FAMILY):
                dxi = (fp.xi[F] - fm.xi[F]) / (2 * dx[j])
                M[i, j] -= Z.inner(dxi).real
    try:
        return np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from exc


# ------------------------------------------ modulation right-hand side

def apply_E(U: SpinorField, v, v_inf) -> SpinorField:
    """E = diag(-|Δv|² - 2iΔv·∇, |Δv|² - 2iΔv·∇) with Δv = v - v∞."""
    dv = np.asarray(v, dtype=float) - np.asarray(v_inf, dtype=float)
    g = U.grid
    m = dv @ dv
    kx, ky, kz = g.kvec
    sym = 1j * (kx * dv[0] + ky * dv[1] + kz * dv[2])
    d1 = ifftn(sym * fftn(U.z1))
    d2 = ifftn(sym * fftn(U.z2))
    return SpinorField(g, -m * U.z1 - 2j * d1, m * U.z2 - 2j * d2, U.t)


def modulation_rhs(U: SpinorField, xi: dict, N: SpinorField, alpha: float, mass: float,
                   xi_dot: dict | None = None, v=(0, 0, 0), v_inf=(0, 0, 0),
                   dt_pairings: dict | None = None) -> np.ndarray:
    """π̇ (complex) from the modulation equations with the stated coefficients.

    Returns (Γ̇, v̇1..3, Ḋ1..3, α̇). ``dt_pairings`` holds ∂_t⟨U, ξ_F⟩, zero
    when orthogonality is maintained.
    """
    dtp = dt_pairings or {}
    inv = 1.0 / mass

    def core(F):
        val = -dtp.get(F, 0.0)
        if xi_dot is not None:
            val += U.inner(xi_dot[F])
        val += -1j * U.inner(apply_E(xi[F], v, v_inf)) if np.any(np.asarray(v) != np.asarray(v_inf)) else 0.0
        val += -1j * N.inner(xi[F])
        return val

    out = np.zeros(8, dtype=complex)
    out[7] = 2 * alpha * inv * core("alpha")
    out[0] = 2 * alpha * inv * (core("Gamma") + 2j * U.inner(xi["alpha"]))
    for k in range(3):
        out[1 + k] = inv * core(f"v{k + 1}")
        out[4 + k] = inv * (core(f"D{k + 1}") + 2j * U.inner(xi[f"v{k + 1}"]))
    return out


# -------------------------------------------------- families along a path

def _xi_parts(fam, g: Grid3D) -> dict:
    """ξ_F = e^{iρ}M_F·S_F(x - c): multiplier M_F (None for 1, else x_k) and complex shape S_F."""
    X = g.coords
    parts = {"alpha": (None, fam.phi + 0j), "Gamma": (None, 1j * fam.d_alpha)}
    for k in range(3):
        parts[f"v{k + 1}"] = (None, 1j * fam.grad[k])
        parts[f"D{k + 1}"] = (X[k], fam.phi + 0j)
    return parts


def _assemble(parts: dict, ph: np.ndarray, g: Grid3D) -> dict:
    out = {}
    for F, (M, S) in parts.items():
        a = ph * (S if M is None else M * S)
        out[F] = SpinorField(g, a, np.conj(a))
    return out


def _xi_from(fam, ph: np.ndarray, g: Grid3D) -> dict:
    return _assemble(_xi_parts(fam, g), ph, g)


def _path_center(path: PathState, t: float, frame: AsymptoticFrame) -> np.ndarray:
    return np.asarray(path.state_at(t).y) - frame.y_inf(t)


def path_families(path: PathState, t: float, shape: SolitonShape) -> dict:
    """ξ_F(t) in the asymptotic frame: e^{±iρ∞} times φ(x + y∞ - y, α) and its derived fields.

    ξ_D carries the frame coordinate x_k, not x_k - c.
    """
    frame = path.asymptotic_frame()
    st = path.state_at(t)
    g = shape.grid
    fam = shape.family(center=_path_center(path, t, frame), alpha=st.alpha)
    return _xi_from(fam, np.exp(1j * frame.rho(t, g)), g)


def path_families_dot(path: PathState, t: float, shape: SolitonShape, fd_alpha: float = 1e-5) -> dict:
    """ξ̇_F = iρ̇∞σ₃ξ_F + e^{±iρ∞}M_F(ẏ∞ - ẏ)·∇S_F + α̇ ∂_αξ_F.

    ρ̇∞ = v̇·x - |v - v∞|² + α - α∞ + Γ̇; the translation acts on the shape S_F
    only, since neither the phase nor the x_k factor of ξ_D moves with the centre.
    """
    frame = path.asymptotic_frame()
    st = path.state_at(t)
    rate = path.rates_at(t)
    g = shape.grid
    X = g.coords
    dv = st.v - frame.v_inf
    vdot = rate[1:4]
    rho_dot = (vdot[0] * X[0] + vdot[1] * X[1] + vdot[2] * X[2] - (dv @ dv)
               + st.alpha - frame.alpha_inf + rate[0])
    ydiff = 2 * frame.v_inf - (2 * st.v + rate[4:7])
    ph = np.exp(1j * frame.rho(t, g))
    center = _path_center(path, t, frame)
    parts = _xi_parts(shape.family(center=center, alpha=st.alpha), g)
    if rate[7] != 0.0:
        da = fd_alpha * st.alpha
        pp = _xi_parts(shape.family(center=center, alpha=st.alpha + da), g)
        pm = _xi_parts(shape.family(center=center, alpha=st.alpha - da), g)
    kx, ky, kz = g.kvec
    gsym = 1j * (kx * ydiff[0] + ky * ydiff[1] + kz * ydiff[2])
    out = {}
    for F, (M, S) in parts.items():
        dS = ifftn(gsym * fftn(S))
        if rate[7] != 0.0:
            dS = dS + rate[7] * (pp[F][1] - pm[F][1]) / (2 * da)
        full = S if M is None else M * S
        dfull = dS if M is None else M * dS
        a = ph * (1j * rho_dot * full + dfull)
        out[F] = SpinorField(g, a, np.conj(a))
    return out
