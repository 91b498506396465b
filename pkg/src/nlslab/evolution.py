"""Time stepping for the cubic NLS and its linearization, plus norm bookkeeping.

Two integrators are provided. ``step_nls`` is a Strang splitting in the lab
frame. ``ETDRK4`` is an exponential Runge-Kutta scheme for diagonal linear
parts; it is used in a frame rotating at a fixed frequency, where a discrete
ground state is an exact fixed point of the scheme.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigInvalid, NonFinite, PathExhausted
from .grid import Grid3D, SpinorField, fftn, ifftn
from .hamiltonian import LinearizedOperator, nonlinearity


@dataclass
class EvolutionConfig:
    dt: float = 0.05
    T: float = 1.0
    scheme: str = "strang_split"
    dealias: bool = False
    stride: int = 0
    sponge: float = 0.0
    sponge_width: float = 0.25

    def __post_init__(self):
        if not self.dt > 0 or not self.T >= 0:
            raise ConfigInvalid("dt must be positive and T non-negative")
        if self.scheme not in ("strang_split", "etdrk4", "linearized_semi_implicit"):
            raise ConfigInvalid(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("non-finite values in the evolved field")


# ------------------------------------------------------------- full NLS

def step_nls(psi: np.ndarray, dt: float, g: Grid3D, dealias: bool = False) -> np.ndarray:
    """One Strang step of iψ_t + Δψ = -|ψ|²ψ: half kinetic, exact phase rotation, half kinetic."""
    half = np.exp(-0.5j * dt * g.k2)
    u = ifftn(half * fftn(psi))
    u = u * np.exp(1j * dt * np.abs(u) ** 2)
    uh = half * fftn(u)
    if dealias:
        uh = uh * g.dealias_mask
    out = ifftn(uh)
    _check_finite(out)
    return out


def sponge_profile(g: Grid3D, width: float = 0.25) -> np.ndarray:
    """Smooth absorber that vanishes inside |x_k| < (1 - width)L and rises to 1 at the faces."""
    s = np.zeros(g.shape)
    for X in g.coords:
        d = (np.abs(X) - (1 - width) * g.L) / (width * g.L)
        s = np.maximum(s, np.clip(d, 0.0, 1.0))
    return np.sin(0.5 * np.pi * s) ** 2


class ETDRK4:
    """Fourth-order exponential time differencing for u_t = Lu + N(u, t) with diagonal L.

    ``symbols`` holds one Fourier symbol per field component; the state is a
    list of physical-space arrays.
    """

    def __init__(self, symbols: Sequence[np.ndarray], dt: float,
                 nonlinear: Callable[[list, float], list], n_contour: int = 32):
        self.dt = dt
        self.N = nonlinear
        self.coef = [self._coefficients(np.asarray(s), dt, n_contour) for s in symbols]

    @staticmethod
    def _coefficients(sym: np.ndarray, dt: float, m: int):
        c = sym * dt
        E = np.exp(c)
        E2 = np.exp(c / 2)
        Q = np.zeros_like(c, dtype=complex)
        f1 = np.zeros_like(Q)
        f2 = np.zeros_like(Q)
        f3 = np.zeros_like(Q)
        roots = np.exp(2j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
        for rt in roots:
            r = c + rt
            er = np.exp(r)
            Q += (np.exp(r / 2) - 1) / r
            f1 += (-4 - r + er * (4 - 3 * r + r * r)) / r ** 3
            f2 += (2 + r + er * (r - 2)) / r ** 3
            f3 += (-4 - 3 * r - r * r + er * (4 - r)) / r ** 3
        return E, E2, dt * Q / m, dt * f1 / m, dt * f2 / m, dt * f3 / m

    def step(self, u: list, t: float) -> list:
        dt = self.dt
        uh = [fftn(x) for x in u]
        Nu = [fftn(x) for x in self.N(u, t)]
        ah = [c[1] * x + c[2] * n for c, x, n in zip(self.coef, uh, Nu)]
        a = [ifftn(x) for x in ah]
        Na = [fftn(x) for x in self.N(a, t + dt / 2)]
        bh = [c[1] * x + c[2] * n for c, x, n in zip(self.coef, uh, Na)]
        b = [ifftn(x) for x in bh]
        Nb = [fftn(x) for x in self.N(b, t + dt / 2)]
        ch = [c[1] * x + c[2] * (2 * nb - n) for c, x, nb, n in zip(self.coef, ah, Nb, Nu)]
        cc = [ifftn(x) for x in ch]
        Nc = [fftn(x) for x in self.N(cc, t + dt)]
        out = [ifftn(c[0] * x + c[3] * n + 2 * c[4] * (na + nb) + c[5] * nc)
               for c, x, n, na, nb, nc in zip(self.coef, uh, Nu, Na, Nb, Nc)]
        _check_finite(*out)
        return out


def rotating_nls_stepper(g: Grid3D, dt: float, frame_alpha: float, sponge: float = 0.0,
                         sponge_width: float = 0.25) -> ETDRK4:
    """ETDRK4 for ψ_t = i(Δψ - aψ + |ψ|²ψ) - γ(x)ψ, the NLS seen in a frame rotating at a."""
    damp = sponge * sponge_profile(g, sponge_width) if sponge > 0 else None

    def nl(u, t):
        f = 1j * np.abs(u[0]) ** 2 * u[0]
        if damp is not None:
            f = f - damp * u[0]
        return [f]

    return ETDRK4([-1j * (g.k2 + frame_alpha)], dt, nl)


def linear_spinor_stepper(op: LinearizedOperator, dt: float, source: Callable | None = None,
                          sponge: float = 0.0, sponge_width: float = 0.25, adjoint: bool = False) -> ETDRK4:
    """ETDRK4 for Z_t = i(ℋZ - S(t)), or Z_t = iℋ*Z when ``adjoint``.

    The free part diag(Δ - α, -Δ + α) is treated exactly; the potential and the
    source enter the nonlinear slot.
    """
    g = op.grid
    s = g.k2 + op.alpha
    Va, Vb, Vc, Vd = op.potential()
    if adjoint:
        Va, Vb, Vc, Vd = np.conj(Va), np.conj(Vc), np.conj(Vb), np.conj(Vd)
    damp = sponge * sponge_profile(g, sponge_width) if sponge > 0 else None

    def nl(u, t):
        a = 1j * (Va * u[0] + Vb * u[1])
        b = 1j * (Vc * u[0] + Vd * u[1])
        if source is not None:
            s1, s2 = source(t)
            a = a - 1j * s1
            b = b - 1j * s2
        if damp is not None:
            a = a - damp * u[0]
            b = b - damp * u[1]
        return [a, b]

    return ETDRK4([-1j * s, 1j * s], dt, nl)


# ------------------------------------------------------- record keeping

def l6_plus_inf(f: np.ndarray, g: Grid3D, n_tau: int = 20) -> float:
    """Upper bound for ‖f‖_{L⁶+L^∞} from amplitude splits at log-spaced thresholds."""
    a = np.abs(f)
    top = a.max()
    if top == 0:
        return 0.0
    best = g.norm(a, 6)
    for tau in top * np.logspace(-4, 0, n_tau):
        lo = np.minimum(a, tau)
        hi = a - lo
        best = min(best, g.norm(hi, 6) + float(lo.max()))
    return float(best)


def h_half_norm(f: np.ndarray, g: Grid3D) -> float:
    fh = fftn(f)
    w = np.sqrt(1.0 + g.k2)
    return float(math.sqrt(np.sum(w * np.abs(fh) ** 2) * g.dv / f.size))


def conserved_quantities(psi: np.ndarray, g: Grid3D) -> tuple[float, float]:
    """mass = ∫|ψ|², energy = ∫|∇ψ|² - ½∫|ψ|⁴ with the spectral gradient."""
    ph = fftn(psi)
    mass = float(np.sum(np.abs(psi) ** 2) * g.dv)
    grad2 = float(np.sum(g.k2 * np.abs(ph) ** 2) * g.dv / psi.size)
    return mass, grad2 - 0.5 * float(np.sum(np.abs(psi) ** 4) * g.dv)


def field_norms(f: np.ndarray, g: Grid3D) -> dict:
    return {"L2": g.norm(f, 2), "L6": g.norm(f, 6), "Linf": g.norm(f, np.inf),
            "L6plusInf": l6_plus_inf(f, g), "H12": h_half_norm(f, g)}


@dataclass
class TrajectoryRecord:
    grid: Grid3D
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    path_log: list = field(default_factory=list)
    blowup: bool = False

    def append(self, t: float, row: dict, snapshot=None):
        if self.times and not t > self.times[-1]:
            raise ConfigInvalid("trajectory times must increase")
        self.times.append(float(t))
        self.rows.append(row)
        if snapshot is not None:
            self.snapshots.append((float(t), snapshot))

    def column(self, key: str) -> np.ndarray:
        return np.array([r.get(key, np.nan) for r in self.rows])

    def write_csv(self, path):
        keys = ["t"] + sorted({k for r in self.rows for k in r})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for t, r in zip(self.times, self.rows):
                w.writerow([t] + [r.get(k, "") for k in keys[1:]])


def power_law_fit(t, y, window=None) -> tuple[float, float]:
    """Slope and R² of log y against log t over the window."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t > 0) & (y > 0)
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    if sel.sum() < 3:
        return float("nan"), float("nan")
    lx, ly = np.log(t[sel]), np.log(y[sel])
    coef = np.polyfit(lx, ly, 1)
    pred = np.polyval(coef, lx)
    ss = np.sum((ly - ly.mean()) ** 2)
    # a constant series (ss at roundoff level) is fitted exactly by slope 0
    r2 = 1.0 - np.sum((ly - pred) ** 2) / ss if ss > 1e-24 * max(1.0, float(np.sum(ly * ly))) else 1.0
    return float(coef[0]), float(r2)


def norm_diagnostics(tr: TrajectoryRecord, beta: float = 0.5, q: float | None = None, window=None) -> dict:
    """Space-time norms from the recorded rows by trapezoid quadrature in t."""
    t = np.asarray(tr.times)
    if len(t) == 0:
        return {}

    def trap(f):
        return float(np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1]))) if len(t) > 1 else 0.0

    L2, L6, Linf, L6i = (tr.column(k) for k in ("L2", "L6", "Linf", "L6plusInf"))
    weight = (1.0 + t * t) ** beta
    out = {
        "LinfL2": float(np.nanmax(L2)),
        "L2L6": math.sqrt(trap(L6 ** 2)),
        "weighted_L2_L6plusInf": math.sqrt(trap(weight * L6i ** 2)),
        "beta": beta,
    }
    if q is not None:
        out["q"] = q
    if len(t) > 2 and np.any(L2 > 0):
        out["Linf_exponent"], out["Linf_r2"] = power_law_fit(t, Linf, window)
        out["L6_exponent"], out["L6_r2"] = power_law_fit(t, L6, window)
    return out


# ----------------------------------------------------------- drivers

def evolve_nls(psi0: np.ndarray, g: Grid3D, cfg: EvolutionConfig, frame_alpha: float = 0.0,
               observer: Callable | None = None, blowup_factor: float = 1e3) -> tuple[np.ndarray, TrajectoryRecord]:
    """Integrate the full NLS; rows are recorded every ``stride`` steps (0 means start and end)."""
    tr = TrajectoryRecord(g)
    psi = np.asarray(psi0, dtype=complex).copy()
    sup0 = max(np.abs(psi).max(), 1e-300)
    n = cfg.n_steps
    stride = cfg.stride or max(n, 1)
    stepper = None
    # the linearized semi-implicit scheme is served by ETDRK4: exact linear part, explicit cubic
    if cfg.scheme in ("etdrk4", "linearized_semi_implicit") or frame_alpha != 0.0 or cfg.sponge > 0:
        stepper = rotating_nls_stepper(g, cfg.dt, frame_alpha, cfg.sponge, cfg.sponge_width)

    def record(t, psi):
        m, e = conserved_quantities(psi, g)
        row = {"mass": m, "energy": e, **field_norms(psi, g)}
        if observer is not None:
            row.update(observer(t, psi) or {})
        tr.append(t, row)

    record(0.0, psi)
    t = 0.0
    for i in range(1, n + 1):
        try:
            if stepper is None:
                psi = step_nls(psi, cfg.dt, g, cfg.dealias)
            else:
                psi = stepper.step([psi], t)[0]
        except NonFinite:
            tr.blowup = True
            raise
        t = i * cfg.dt
        if np.abs(psi).max() > blowup_factor * sup0:
            tr.blowup = True
            record(t, psi)
            break
        if i % stride == 0 or i == n:
            record(t, psi)
    return psi, tr


def evolve_linear(Z0: SpinorField, op: LinearizedOperator, dt: float, times: Sequence[float],
                  adjoint: bool = False, sponge: float = 0.0, sponge_width: float = 0.25,
                  source: Callable | None = None, post: Callable | None = None) -> list:
    """Snapshots of e^{itℋ}Z₀ (or e^{itℋ*}Z₀) at the requested times, in the frame rotating at α.

    ``post`` maps the spinor after every step, e.g. a reprojection onto Ran P_c.
    """
    stepper = linear_spinor_stepper(op, dt, source, sponge, sponge_width, adjoint)
    u = [Z0.z1.copy(), Z0.z2.copy()]
    t = 0.0
    out = []
    for target in sorted(times):
        n = int(round((target - t) / dt))
        for _ in range(n):
            u = stepper.step(u, t)
            t += dt
            if post is not None:
                Z = post(SpinorField(op.grid, u[0], u[1], t))
                u = [Z.z1, Z.z2]
        out.append(SpinorField(op.grid, u[0].copy(), u[1].copy(), t))
    return out


def evolve_backward_adjoint(Z0: SpinorField, op: LinearizedOperator, dt: float, s: float, **kw) -> SpinorField:
    """e^{-isℋ*}Z₀ via e^{-isℋ*} = σ₃e^{-isℋ}σ₃ and, for a real ground state, e^{-isℋ}Y = conj(e^{isℋ}conj Y)."""
    if np.abs(op.W.imag).max() > 1e-12 * max(np.abs(op.W).max(), 1e-300):
        raise ConfigInvalid("backward flow requires a real ground state field")
    snap = evolve_linear(Z0.sigma3().conj(), op, dt, [s], **kw)[0].conj()
    return snap.sigma3()


def evolve_linearized(Z0: SpinorField, path, shape, cfg: EvolutionConfig, source_trajectory: Callable | None = None,
                      mode: str = "homogeneous", fd_dt: float = 1e-4) -> TrajectoryRecord:
    """Lab-frame flow iZ_t + ℋ^Z_{π(t)}Z = -iπ̇∂_πW(π) + N^Z(Z⁰, π) along a parameter path.

    mode: ``homogeneous`` drops both sources, ``picard`` takes Z⁰ from
    ``source_trajectory(t)``, ``self_consistent`` uses Z⁰ = Z.
    """
    from .modulation import moving_soliton
    if mode not in ("homogeneous", "picard", "self_consistent"):
        raise ConfigInvalid(f"unknown mode {mode!r}")
    if mode == "picard" and source_trajectory is None:
        raise ConfigInvalid("picard mode needs a source trajectory")
    g = Z0.grid
    horizon = path.times[-1]
    if cfg.T > horizon + 1e-12 and path.tail_tol is not None and np.abs(path.rates[-1]).max() > 0:
        raise PathExhausted(f"path ends at {horizon} before T = {cfg.T}")

    def W_at(t):
        return moving_soliton(path, t, shape)

    def modulation_source(t, W):
        Wt = (W_at(t + fd_dt) - W_at(t - fd_dt)) / (2 * fd_dt)
        res = 1j * Wt + g.laplacian(W) + np.abs(W) ** 2 * W
        return -res

    def nl(u, t):
        W = W_at(t)
        Z = SpinorField(g, u[0], u[1])
        m = np.abs(W) ** 2
        w2 = W * W
        a = 1j * (2 * m * u[0] + w2 * u[1])
        b = 1j * (-np.conj(w2) * u[0] - 2 * m * u[1])
        if mode != "homogeneous":
            r = modulation_source(t, W)
            Zs = Z if mode == "self_consistent" else source_trajectory(t)
            N = nonlinearity(Zs, W)
            a = a - 1j * (r + N.z1)
            b = b - 1j * (-np.conj(r) + N.z2)
        return [a, b]

    stepper = ETDRK4([-1j * g.k2, 1j * g.k2], cfg.dt, nl)
    tr = TrajectoryRecord(g)
    u = [Z0.z1.copy(), Z0.z2.copy()]
    stride = cfg.stride or max(cfg.n_steps, 1)

    def record(t):
        Z = SpinorField(g, u[0], u[1], t)
        tr.append(t, {"L2": Z.norm(), **{k: v for k, v in field_norms(u[0], g).items() if k != "L2"}},
                  Z.copy())

    record(0.0)
    t = 0.0
    for i in range(1, cfg.n_steps + 1):
        u = stepper.step(u, t)
        t = i * cfg.dt
        if i % stride == 0 or i == cfg.n_steps:
            record(t)
    return tr


# ---------------------------------------------- algebraic identity checks

def nls_residual(psi: np.ndarray, psi_t: np.ndarray, g: Grid3D) -> np.ndarray:
    """iψ_t + Δψ + |ψ|²ψ."""
    return 1j * psi_t + g.laplacian(psi) + np.abs(psi) ** 2 * psi


def linearized_residual(Z: SpinorField, Z_t: SpinorField, W: np.ndarray) -> SpinorField:
    """iZ_t + ℋ^Z Z - N^Z(Z, W) with the lab-frame operator."""
    g = Z.grid
    op = LinearizedOperator(g, 0.0, np.asarray(W, dtype=complex))
    HZ = op.apply(Z)
    N = nonlinearity(Z, W)
    return SpinorField(g, 1j * Z_t.z1 + HZ.z1 - N.z1, 1j * Z_t.z2 + HZ.z2 - N.z2)
