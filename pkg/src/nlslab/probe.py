"""Shooting for the unstable-direction correction and classification of perturbed ground states.

Everything runs in the frame rotating at the base frequency α₀, where the
discrete ground state is a fixed point of the time stepper. A trajectory starts
from W + R₀ + h f⁺₁ and b₊(t) is read off from the projections after the
modulation parameters have been refitted.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (BracketFailed, ConfigInvalid, HorizonTooShort, NewtonDiverged, NonFinite,
                     SingularJacobian)
from .evolution import ETDRK4, field_norms, power_law_fit, rotating_nls_stepper
from .ground_state import GridGroundState, grid_ground_state
from .grid import Grid3D, SpinorField
from .hamiltonian import LinearizedOperator, assemble
from .modulation import SolitonParams, fit_modulation, static_families
from .shapes import GridShape
from .spectral import (NullSpaceBasis, ProjectionSet, SpectralData, build_null_basis, riesz_projections,
                       unstable_pair)

CLASSES = ("Disperses", "EscapesUnstable", "Blowup", "Undecided")


@dataclass
class ProbeConfig:
    delta: float = 1e-2
    T: float | None = None
    T_sigma: float = 6.0
    dt: float = 0.1
    stride: int = 2
    h_bracket: tuple = (-0.1, 0.1)
    escape_bound: float = 0.5
    blowup_amplitude: float = 3.0
    dispersal_fraction: float = 1.0
    q: float = 1.0
    beta: float = 0.5
    refit: bool = True
    sponge: float = 0.0
    h_tol: float = 1e-9
    max_secant: int = 12
    min_sigma_T: float = 3.0
    trivial_tol: float = 1e-7

    def __post_init__(self):
        if not self.dt > 0 or self.stride < 1:
            raise ConfigInvalid("dt must be positive and stride >= 1")
        if not 1.0 <= self.q < 4.0 / 3.0:
            raise ConfigInvalid(f"q must lie in [1, 4/3), got {self.q}")
        if self.h_bracket[0] >= self.h_bracket[1]:
            raise ConfigInvalid("h bracket must be an increasing interval")

    def horizon(self, sigma: float) -> float:
        return self.T if self.T is not None else self.T_sigma / sigma


@dataclass
class ProbeSetup:
    """Ground state, operator, spectral data and projections on one grid."""

    grid: Grid3D
    alpha: float
    ground: GridGroundState
    shape: GridShape
    op: LinearizedOperator
    basis: NullSpaceBasis
    spectral: SpectralData
    projections: ProjectionSet

    @classmethod
    def build(cls, alpha: float, n: int, L: float, eig_tol: float = 1e-6) -> "ProbeSetup":
        g = Grid3D(n, L)
        gs = grid_ground_state(alpha, g)
        shape = GridShape(gs)
        op = assemble(gs.field, alpha, g)
        basis = build_null_basis(shape)
        sd = unstable_pair(op, basis, eig_tol=eig_tol)
        return cls(g, alpha, gs, shape, op, basis, sd, riesz_projections(basis, sd))

    @property
    def W(self) -> np.ndarray:
        return self.ground.field.astype(complex)

    @property
    def f_plus_component(self) -> np.ndarray:
        return self.spectral.f_plus.z1

    def admissible(self, R0: np.ndarray) -> np.ndarray:
        """Remove the P₊ and P_root parts of (R₀, conj R₀) and return the first component."""
        U = SpinorField.from_scalar(self.grid, R0)
        c = self.projections.coefficients(U)
        out = U
        for j in range(9):
            out = out - self.projections.Q[j] * c[j]
        return 0.5 * (out.z1 + np.conj(out.z2))

    def membership_defect(self, R0: np.ndarray) -> float:
        U = SpinorField.from_scalar(self.grid, R0)
        c = self.projections.coefficients(U)
        return float(np.abs(c[:9]).max() / max(U.norm(), 1e-300))


@dataclass
class ProbeReport:
    classification: str
    h: float
    times: list = field(default_factory=list)
    b_plus: list = field(default_factory=list)
    b_minus: list = field(default_factory=list)
    params: list = field(default_factory=list)
    R_L6: list = field(default_factory=list)
    R_L2: list = field(default_factory=list)
    growth_rate: float = float("nan")
    L6_slope_late: float = float("nan")
    L6_decay_exponent: float = float("nan")
    nu: float = float("nan")
    sigma: float = float("nan")
    horizon: float = float("nan")
    W_L2: float = float("nan")
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = [list(map(float, p)) for p in self.params]
        return d


def _to_static_frame(Z: SpinorField, p: SolitonParams) -> SpinorField:
    """Undo the phase e^{i(Γ + v·x)} and the translation by D."""
    g = Z.grid
    X = g.coords
    theta = p.Gamma + p.v[0] * X[0] + p.v[1] * X[1] + p.v[2] * X[2]
    a = g.shift(np.exp(-1j * theta) * Z.z1, -p.D)
    b = g.shift(np.exp(1j * theta) * Z.z2, -p.D)
    return SpinorField(g, a, b, Z.t)


def _base_params(setup: ProbeSetup) -> SolitonParams:
    return SolitonParams(alpha=setup.alpha)


def run_trajectory(setup: ProbeSetup, R0: np.ndarray, h: float, cfg: ProbeConfig,
                   stop_on_escape: bool = True) -> ProbeReport:
    g = setup.grid
    sigma = setup.spectral.sigma
    T = cfg.horizon(sigma)
    n_steps = int(round(T / cfg.dt))
    psi = setup.W + R0 + h * setup.f_plus_component
    stepper: ETDRK4 = rotating_nls_stepper(g, cfg.dt, setup.alpha, cfg.sponge)
    amp0 = float(np.abs(setup.W).max())
    rep = ProbeReport("Undecided", float(h), sigma=sigma, horizon=T, W_L2=g.norm(setup.W))
    params = _base_params(setup)

    def observe(t, psi):
        nonlocal params
        if cfg.refit:
            fit = fit_modulation(psi, params, setup.shape, fit_tol=1e-10, basin=np.inf)
            params = fit.params
            Z = fit.Z
        else:
            Z = SpinorField.from_scalar(g, psi - setup.W)
        c = setup.projections.coefficients(_to_static_frame(Z, params))
        rep.times.append(float(t))
        rep.b_plus.append(float(c[8].real))
        rep.b_minus.append(float(c[9].real))
        rep.params.append(params.to_vector())
        nr = field_norms(Z.z1, g)
        rep.R_L6.append(nr["L6"])
        rep.R_L2.append(nr["L2"])

    t = 0.0
    try:
        observe(t, psi)
        for i in range(1, n_steps + 1):
            psi = stepper.step([psi], t)[0]
            t = i * cfg.dt
            if np.abs(psi).max() > cfg.blowup_amplitude * amp0:
                rep.classification = "Blowup"
                rep.note = f"amplitude exceeded {cfg.blowup_amplitude}x the ground state at t={t:.3f}"
                break
            if i % cfg.stride == 0 or i == n_steps:
                observe(t, psi)
                if stop_on_escape and abs(rep.b_plus[-1]) > cfg.escape_bound:
                    rep.classification = "EscapesUnstable"
                    break
    except NonFinite:
        rep.classification = "Blowup"
        rep.note = f"non-finite field at t={t:.3f}"
    except (NewtonDiverged, SingularJacobian) as exc:
        rep.classification = "EscapesUnstable"
        rep.note = f"modulation fit lost the soliton at t={t:.3f}: {exc}"
    _finalize(rep, cfg)
    return rep


def _finalize(rep: ProbeReport, cfg: ProbeConfig):
    t = np.array(rep.times)
    if len(t) < 3:
        return
    bp = np.abs(np.array(rep.b_plus))
    half = t >= 0.5 * t[-1]
    if half.sum() >= 3 and np.all(bp[half] > 0):
        rep.growth_rate = float(np.polyfit(t[half], np.log(bp[half]), 1)[0])
    L6 = np.array(rep.R_L6)
    if half.sum() >= 3:
        rep.L6_slope_late = float(np.polyfit(t[half], L6[half], 1)[0])
        rep.L6_decay_exponent = power_law_fit(t[half], L6[half])[0]
    P = np.array(rep.params)
    rates = np.gradient(P, t, axis=0)
    speed = np.linalg.norm(rates, axis=1)
    f = np.sqrt(1 + t * t) * speed
    rep.nu = float(np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1])) + speed.max())
    if rep.classification != "Undecided":
        return
    if abs(rep.b_plus[-1]) > cfg.escape_bound:
        rep.classification = "EscapesUnstable"
    elif max(rep.R_L2) <= cfg.trivial_tol * rep.W_L2:
        rep.classification = "Disperses"
    elif rep.L6_slope_late <= 0.0 and L6[-1] <= cfg.dispersal_fraction * L6.max():
        rep.classification = "Disperses"


def probe(R0: np.ndarray, h: float, cfg: ProbeConfig, setup: ProbeSetup) -> ProbeReport:
    return run_trajectory(setup, np.asarray(R0, dtype=complex), h, cfg)


def _terminal_b_plus(setup, R0, h, cfg) -> float:
    # only the end point matters for the shooting condition
    n_steps = int(round(cfg.horizon(setup.spectral.sigma) / cfg.dt))
    rep = run_trajectory(setup, R0, h, replace(cfg, stride=max(n_steps, 1)), stop_on_escape=False)
    if rep.classification == "Blowup":
        raise BracketFailed(f"trajectory with h={h:.3e} blew up")
    if rep.times[-1] < 0.999 * rep.horizon:
        raise BracketFailed(f"trajectory with h={h:.3e} stopped at t={rep.times[-1]:.3f}: {rep.note}")
    return rep.b_plus[-1]


def unstable_correction(R0: np.ndarray, cfg: ProbeConfig, setup: ProbeSetup) -> float:
    """h such that b₊(T) = 0 on the trajectory from W + R₀ + h f⁺₁, by secant iteration.

    The map h ↦ b₊(T) is close to affine with slope e^{σT}; the secant is
    started at h = -b₊(0) and at the upper end of the configured bracket.
    """
    R0 = np.asarray(R0, dtype=complex)
    sigma = setup.spectral.sigma
    T = cfg.horizon(sigma)
    if sigma * T < cfg.min_sigma_T:
        raise HorizonTooShort(f"σT = {sigma * T:.2f} below {cfg.min_sigma_T}")
    if not np.any(R0):
        return 0.0
    U = SpinorField.from_scalar(setup.grid, R0)
    h0 = -float(setup.projections.b_plus(U).real)
    lo, hi = cfg.h_bracket
    h1 = h0 + 1e-4 * (hi - lo)
    b0 = _terminal_b_plus(setup, R0, h0, cfg)
    b1 = _terminal_b_plus(setup, R0, h1, cfg)
    for _ in range(cfg.max_secant):
        if b1 == b0:
            raise BracketFailed("secant stalled: equal terminal values")
        h2 = h1 - b1 * (h1 - h0) / (b1 - b0)
        if not lo <= h2 <= hi:
            raise BracketFailed(f"secant iterate {h2:.3e} left the bracket [{lo}, {hi}]")
        if abs(h2 - h1) <= cfg.h_tol * max(1.0, abs(h2)):
            return float(h2)
        h0, b0 = h1, b1
        h1, b1 = h2, _terminal_b_plus(setup, R0, h2, cfg)
    raise BracketFailed(f"secant did not converge in {cfg.max_secant} iterations")


def bump_direction(setup: ProbeSetup, center=(1.0, 0.5, 0.0), width: float = 1.0, seed: int | None = None,
                   phase: bool = True) -> np.ndarray:
    """Admissible unit-L² direction built from a Gaussian bump in units of α^{-1/2}.

    A seeded counter-based generator perturbs the bump centre and phase.
    """
    g = setup.grid
    s = 1.0 / math.sqrt(setup.alpha)
    c = np.asarray(center, dtype=float) * s
    ph = 0.0
    if seed is not None:
        rng = np.random.Generator(np.random.Philox(seed))
        c = c + rng.uniform(-0.5, 0.5, 3) * s
        ph = rng.uniform(0, 2 * np.pi) if phase else 0.0
    d = g.wrapped(c)
    r2 = d[0] ** 2 + d[1] ** 2 + d[2] ** 2
    bump = np.exp(-r2 / (2 * (width * s) ** 2)) * np.exp(1j * ph)
    R = setup.admissible(bump)
    return R / g.norm(R)


def sample_manifold(directions: list, scales: list, cfg: ProbeConfig, setup: ProbeSetup) -> list:
    """Rows (direction, ε, h, classification, L⁶ decay exponent) with errors recorded per row."""
    rows = []
    scale = math.sqrt(setup.ground.mass())
    for i, d in enumerate(directions):
        for eps in scales:
            row = {"direction": i, "epsilon": float(eps), "h": float("nan"), "classification": "Undecided",
                   "L6_decay_exponent": float("nan"), "error": ""}
            try:
                R0 = eps * scale * np.asarray(d)
                h = unstable_correction(R0, cfg, setup)
                rep = probe(R0, h, cfg, setup)
                row.update(h=h, classification=rep.classification, L6_decay_exponent=rep.L6_decay_exponent)
            except Exception as exc:  # noqa: BLE001 - aggregated per row
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows
