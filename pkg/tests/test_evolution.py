import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab.errors import ConfigInvalid, NonFinite, PathExhausted
from nlslab.evolution import (EvolutionConfig, TrajectoryRecord, conserved_quantities, evolve_backward_adjoint,
                              evolve_linear, evolve_linearized, evolve_nls, field_norms, h_half_norm,
                              l6_plus_inf, linearized_residual, nls_residual, norm_diagnostics,
                              power_law_fit, step_nls)
from nlslab.grid import Grid3D, SpinorField, fftn, ifftn
from nlslab.ground_state import grid_ground_state
from nlslab.hamiltonian import nonlinearity
from nlslab.modulation import PathState, SolitonParams

ALPHA = 0.08


@pytest.fixture(scope="module")
def standing32():
    g = Grid3D(32, 16.0)
    return g, grid_ground_state(ALPHA, g).field.astype(complex)


def smooth_random(g, seed, width=3.0):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    return ifftn(fftn(raw) * np.exp(-g.k2 * width ** 2 / 4)) * np.exp(-(g.radius / (0.4 * g.L)) ** 2)


# ------------------------------------------------------------ full NLS

def test_config_validation():
    with pytest.raises(ConfigInvalid):
        EvolutionConfig(dt=0.0)
    with pytest.raises(ConfigInvalid):
        EvolutionConfig(scheme="leapfrog")
    assert EvolutionConfig(dt=0.1, T=1.0).n_steps == 10


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), amp=st.floats(0.1, 3.0))
def test_strang_step_conserves_mass(seed, amp):
    g = Grid3D(16, 8.0)
    psi = amp * smooth_random(g, seed, 1.0)
    m0 = conserved_quantities(psi, g)[0]
    out = psi
    for _ in range(5):
        out = step_nls(out, 0.05, g)
    assert abs(conserved_quantities(out, g)[0] - m0) <= 5e-10 * m0


def test_strang_step_reports_non_finite():
    g = Grid3D(8, 4.0)
    psi = np.ones(g.shape, complex)
    psi[0, 0, 0] = np.nan
    with pytest.raises(NonFinite):
        step_nls(psi, 0.1, g)


def test_free_small_amplitude_matches_fourier_propagator():
    g = Grid3D(32, 8.0)
    f = np.exp(-g.radius ** 2 / 2).astype(complex)
    T = 1.0
    errs = []
    for amp in (1e-3, 2e-3):
        psi, _ = evolve_nls(amp * f, g, EvolutionConfig(dt=0.05, T=T))
        exact = ifftn(np.exp(-1j * g.k2 * T) * fftn(amp * f))
        errs.append(np.abs(psi - exact).max() / np.abs(exact).max())
    # the nonlinear defect is cubic, so its relative size grows like amp²
    assert errs[0] <= 1e-6
    assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.05)


def test_standing_wave_return_is_second_order(standing32):
    # e^{iαt}φ is linearly unstable (rate σ ≈ 5.5α); over T = 5 at α = 0.08 the amplification
    # e^{σT} ≈ 9 leaves the splitting error visible
    g, phi = standing32
    T = 5.0
    errs = []
    for dt in (0.05, 0.025):
        psi, tr = evolve_nls(phi, g, EvolutionConfig(dt=dt, T=T, stride=int(round(1 / dt))))
        errs.append(np.abs(psi - np.exp(1j * ALPHA * T) * phi).max() / np.abs(phi).max())
        mass = tr.column("mass")
        assert np.abs(mass - mass[0]).max() <= 1e-12 * mass[0]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_standing_wave_energy_drift(standing32):
    g, phi = standing32
    T = 5.0
    _, tr = evolve_nls(phi, g, EvolutionConfig(dt=0.025, T=T, stride=40))
    e = tr.column("energy")
    assert np.abs(e - e[0]).max() / abs(e[0]) / T <= 1e-6


@pytest.mark.parametrize("scheme", ["etdrk4", "linearized_semi_implicit"])
def test_rotating_frame_fixed_point(standing32, scheme):
    g, phi = standing32
    psi, _ = evolve_nls(phi, g, EvolutionConfig(dt=0.1, T=2.0, scheme=scheme), frame_alpha=ALPHA)
    assert np.abs(psi - phi).max() <= 1e-10 * np.abs(phi).max()


def test_semi_implicit_lab_frame_standing_wave(standing32):
    g, phi = standing32
    T = 2.0
    psi, _ = evolve_nls(phi, g, EvolutionConfig(dt=0.05, T=T, scheme="linearized_semi_implicit"))
    assert np.abs(psi - np.exp(1j * ALPHA * T) * phi).max() <= 1e-6 * np.abs(phi).max()


def test_blowup_flag_stops_the_run(standing32):
    g, phi = standing32
    psi, tr = evolve_nls(2.0 * phi, g, EvolutionConfig(dt=0.02, T=10.0, stride=25), blowup_factor=2.0)
    assert tr.blowup
    assert tr.times[-1] < 10.0
    assert np.abs(psi).max() > 2.0 * np.abs(2.0 * phi).max()


# ----------------------------------------------------- conserved quantities

def test_conserved_quantities_of_zero():
    g = Grid3D(8, 4.0)
    assert conserved_quantities(np.zeros(g.shape, complex), g) == (0.0, 0.0)


def test_pohozaev_and_energy_sign():
    # ∫|∇φ|² = ¾∫φ⁴ and α∫φ² = ¼∫φ⁴ for the 3D cubic ground state, so E(λφ) = (¾λ² - ½λ⁴)∫φ⁴
    g = Grid3D(48, 16.0)
    phi = grid_ground_state(ALPHA, g).field.astype(complex)
    Q = float(np.sum(np.abs(phi) ** 4) * g.dv)
    m, e = conserved_quantities(phi, g)
    assert e == pytest.approx(0.25 * Q, rel=5e-3)
    assert ALPHA * m == pytest.approx(0.25 * Q, rel=5e-3)
    for lam in (1.2, 1.3):
        E = conserved_quantities(lam * phi, g)[1]
        assert E / Q == pytest.approx(0.75 * lam ** 2 - 0.5 * lam ** 4, abs=2e-3)
    assert conserved_quantities(1.2 * phi, g)[1] > 0
    assert conserved_quantities(1.3 * phi, g)[1] < 0


# ------------------------------------------------------- linearized flow

def test_unstable_pair_growth_and_decay(setup32):
    sd, op = setup32.spectral, setup32.op
    T = 3.0 / sd.sigma
    times = np.linspace(0.0, T, 13)[1:]
    for Z0, sign in ((sd.f_plus, 1.0), (sd.f_minus, -1.0)):
        snaps = evolve_linear(Z0, op, 0.05, times)
        t = np.array([s.t for s in snaps])
        rate = np.polyfit(t, np.log([s.norm() for s in snaps]), 1)[0]
        assert rate == pytest.approx(sign * sd.sigma, rel=2e-2)


def test_lab_frame_flow_on_constant_path(setup32):
    sd = setup32.spectral
    path = PathState.constant(SolitonParams(alpha=ALPHA), horizon=10.0)
    tr = evolve_linearized(sd.f_plus, path, setup32.shape, EvolutionConfig(dt=0.05, T=3.0 / sd.sigma, stride=5))
    rate = np.polyfit(np.array(tr.times), np.log(tr.column("L2")), 1)[0]
    assert rate == pytest.approx(sd.sigma, rel=2e-2)


def test_generalized_null_vector_drifts_linearly(setup32):
    # ℋη_Γ = iη_α and ℋη_α = 0, so e^{itℋ}η_Γ = η_Γ - tη_α
    b = setup32.basis
    eG, eA, xG = b.eta["Gamma"], b.eta["alpha"], b.xi["Gamma"]
    snaps = evolve_linear(eG, setup32.op, 0.05, np.linspace(0.25, 3.0, 12))
    t = np.array([s.t for s in snaps])
    c = np.array([((s - eG).inner(xG) / eA.inner(xG)).real for s in snaps])
    slope, icpt = np.polyfit(t, c, 1)
    r2 = 1 - np.sum((c - np.polyval([slope, icpt], t)) ** 2) / np.sum((c - c.mean()) ** 2)
    assert r2 > 0.99
    assert slope == pytest.approx(-1.0, rel=1e-3)


def test_backward_adjoint_flow_on_dual_vector(setup32):
    sd = setup32.spectral
    s = 2.0
    out = evolve_backward_adjoint(sd.ft_plus, setup32.op, 0.05, s)
    # ℋ*f̃⁺ = iσf̃⁺, so e^{-isℋ*}f̃⁺ = e^{σs}f̃⁺
    assert (out - sd.ft_plus * np.exp(sd.sigma * s)).norm() <= 1e-5 * out.norm()


def test_linearized_flow_needs_a_long_enough_path(setup32):
    p = np.tile(SolitonParams(alpha=ALPHA).to_vector(), (3, 1))
    p[:, 1] = [0.0, 0.01, 0.02]
    path = PathState([0.0, 0.5, 1.0], p)
    with pytest.raises(PathExhausted):
        evolve_linearized(setup32.spectral.f_plus, path, setup32.shape, EvolutionConfig(dt=0.1, T=2.0))
    with pytest.raises(ConfigInvalid):
        evolve_linearized(setup32.spectral.f_plus, path, setup32.shape, EvolutionConfig(dt=0.1, T=0.5),
                          mode="picard")


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), amp=st.floats(1e-3, 1.0))
def test_full_residual_equals_linearized_residual(seed, amp):
    # for ψ = W + R: iψ_t + Δψ + |ψ|²ψ = (iW_t + ΔW + |W|²W) + first component of
    # iZ_t + ℋ^Z Z - N^Z(Z, W) with Z = (R, conj R)
    g = Grid3D(16, 8.0)
    W = smooth_random(g, seed)
    Wt = smooth_random(g, seed + 1)
    R = amp * smooth_random(g, seed + 2)
    Rt = amp * smooth_random(g, seed + 3)
    full = nls_residual(W + R, Wt + Rt, g)
    base = nls_residual(W, Wt, g)
    lin = linearized_residual(SpinorField.from_scalar(g, R), SpinorField.from_scalar(g, Rt), W)
    scale = np.abs(full).max()
    assert np.abs(full - base - lin.z1).max() <= 1e-10 * scale
    assert np.abs(lin.z2 + np.conj(lin.z1)).max() <= 1e-10 * scale


def test_nonlinearity_is_the_cubic_remainder():
    g = Grid3D(8, 4.0)
    W = smooth_random(g, 1)
    R = smooth_random(g, 2)
    N = nonlinearity(SpinorField.from_scalar(g, R), W)
    expected = -(np.abs(W + R) ** 2 * (W + R) - np.abs(W) ** 2 * W - 2 * np.abs(W) ** 2 * R - W * W * np.conj(R))
    assert np.abs(N.z1 - expected).max() <= 1e-12 * np.abs(expected).max()


# ------------------------------------------------------------- norms

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_sum_space_norm_is_below_both_endpoints(seed):
    g = Grid3D(8, 4.0)
    f = smooth_random(g, seed, 0.5)
    v = l6_plus_inf(f, g)
    assert v <= g.norm(f, 6) * (1 + 1e-12)
    assert v <= g.norm(f, np.inf) * (1 + 1e-12)
    assert v > 0


def test_half_derivative_norm_of_plane_wave():
    g = Grid3D(16, np.pi)
    k = np.array([2.0, -1.0, 3.0])
    f = np.exp(1j * (k[0] * g.coords[0] + k[1] * g.coords[1] + k[2] * g.coords[2]))
    assert h_half_norm(f, g) ** 2 == pytest.approx((1 + k @ k) ** 0.5 * g.norm(f) ** 2, rel=1e-12)


def test_zero_trajectory_norms():
    g = Grid3D(8, 4.0)
    tr = TrajectoryRecord(g)
    for t in (0.0, 1.0, 2.0):
        tr.append(t, field_norms(np.zeros(g.shape, complex), g))
    d = norm_diagnostics(tr, beta=0.5, q=1.0)
    assert d["LinfL2"] == 0.0 and d["L2L6"] == 0.0 and d["weighted_L2_L6plusInf"] == 0.0


@settings(max_examples=20, deadline=None)
@given(p=st.floats(-3.0, 3.0), c=st.floats(0.1, 10.0))
def test_power_law_fit_recovers_exponent(p, c):
    t = np.linspace(1.0, 10.0, 30)
    slope, r2 = power_law_fit(t, c * t ** p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-9)


def test_power_law_fit_needs_three_points():
    slope, r2 = power_law_fit([1.0, 2.0], [1.0, 0.5])
    assert np.isnan(slope) and np.isnan(r2)


def test_trajectory_record_order_and_csv(tmp_path):
    g = Grid3D(8, 4.0)
    tr = TrajectoryRecord(g)
    tr.append(0.0, {"mass": 1.0})
    tr.append(0.5, {"mass": 1.0, "L2": 2.0})
    with pytest.raises(ConfigInvalid):
        tr.append(0.5, {"mass": 1.0})
    tr.write_csv(tmp_path / "n.csv")
    rows = list(csv.reader(open(tmp_path / "n.csv")))
    assert rows[0] == ["t", "L2", "mass"]
    assert rows[2] == ["0.5", "2.0", "1.0"]
    assert rows[1][1] == ""
