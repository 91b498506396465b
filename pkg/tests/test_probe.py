import math

import numpy as np
import pytest

from nlslab.errors import ConfigInvalid, HorizonTooShort
from nlslab.evolution import evolve_linear
from nlslab.grid import SpinorField
from nlslab.probe import (ProbeConfig, ProbeReport, _finalize, bump_direction, probe, sample_manifold,
                          unstable_correction)


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        ProbeConfig(q=1.5)
    with pytest.raises(ConfigInvalid):
        ProbeConfig(q=0.9)
    with pytest.raises(ConfigInvalid):
        ProbeConfig(dt=0.0)
    with pytest.raises(ConfigInvalid):
        ProbeConfig(h_bracket=(0.1, -0.1))
    assert ProbeConfig().horizon(0.5) == pytest.approx(12.0)
    assert ProbeConfig(T=3.0).horizon(0.5) == 3.0


def test_bump_direction_is_admissible_and_deterministic(setup32):
    d0 = bump_direction(setup32)
    assert setup32.grid.norm(d0) == pytest.approx(1.0, rel=1e-12)
    assert setup32.membership_defect(d0) <= 1e-12
    a = bump_direction(setup32, seed=7)
    b = bump_direction(setup32, seed=7)
    c = bump_direction(setup32, seed=8)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert setup32.membership_defect(a) <= 1e-12


def test_zero_perturbation_needs_no_correction(setup32):
    R0 = np.zeros(setup32.grid.shape, complex)
    assert unstable_correction(R0, ProbeConfig(), setup32) == 0.0


def test_zero_perturbation_disperses_trivially(setup32):
    rep = probe(np.zeros(setup32.grid.shape, complex), 0.0, ProbeConfig(), setup32)
    assert rep.classification == "Disperses"
    # only roundoff, amplified by e^{σT} = e^6
    assert max(rep.R_L2) <= 1e-7 * rep.W_L2
    assert max(abs(b) for b in rep.b_plus) <= 1e-8


def test_short_horizon_is_rejected(setup32):
    d = bump_direction(setup32)
    with pytest.raises(HorizonTooShort):
        unstable_correction(1e-3 * d, ProbeConfig(T=1.0), setup32)


def test_linear_flow_correction_cancels_unstable_component(setup32):
    # for e^{itℋ} the unstable coefficient evolves as b₊(0)e^{σt}; h = -b₊(0) removes it
    ps, sd = setup32.projections, setup32.spectral
    g = setup32.grid
    rng = np.random.default_rng(3)
    R = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)) * np.exp(-(g.radius / 6) ** 2)
    U = SpinorField.from_scalar(g, 1e-3 * R)
    b0 = ps.b_plus(U)
    assert abs(b0) > 1e-6
    T = 3.0 / sd.sigma
    raw = evolve_linear(U, setup32.op, 0.05, [T])[0]
    fixed = evolve_linear(U - sd.f_plus * b0, setup32.op, 0.05, [T])[0]
    assert abs(ps.b_plus(raw)) == pytest.approx(abs(b0) * math.exp(sd.sigma * raw.t), rel=1e-4)
    # what is left is stepping leakage from the other components (~1e-5 relative), amplified like b₊
    assert abs(ps.b_plus(fixed)) <= 1e-4 * abs(ps.b_plus(raw))


def test_classification_rules_on_synthetic_traces():
    cfg = ProbeConfig()
    t = np.linspace(0, 10, 11)

    def report(bp, L6, L2=None):
        rep = ProbeReport("Undecided", 0.0, W_L2=1.0)
        rep.times = list(t)
        rep.b_plus = list(bp)
        rep.b_minus = [0.0] * len(t)
        rep.params = [np.zeros(8)] * len(t)
        rep.R_L6 = list(L6)
        rep.R_L2 = list(L2 if L2 is not None else L6)
        _finalize(rep, cfg)
        return rep

    rep = report(1e-2 * np.exp(0.5 * t), 1e-2 * np.ones_like(t))
    assert rep.classification == "EscapesUnstable"
    assert rep.growth_rate == pytest.approx(0.5, rel=1e-9)
    assert report(1e-6 * np.ones_like(t), 1e-2 / (1 + t)).classification == "Disperses"
    assert report(1e-6 * np.ones_like(t), 1e-2 * (1 + t)).classification == "Undecided"
    assert report(np.zeros_like(t), np.zeros_like(t)).classification == "Disperses"


def test_classification_is_phase_equivariant(setup32):
    # rotating the whole initial state by e^{iγ} only shifts the fitted Γ
    d = bump_direction(setup32)
    R0 = 4e-3 * math.sqrt(setup32.ground.mass()) * d
    h = 2e-4
    cfg = ProbeConfig(stride=10)
    base = probe(R0, h, cfg, setup32)
    f1 = setup32.f_plus_component
    gamma = 0.3
    psi0 = np.exp(1j * gamma) * (setup32.W + R0 + h * f1)
    rot = probe(psi0 - setup32.W - h * f1, h, cfg, setup32)
    assert rot.classification == base.classification
    assert np.allclose(rot.b_plus, base.b_plus, rtol=1e-6, atol=1e-9)
    assert rot.params[-1][0] - base.params[-1][0] == pytest.approx(gamma, abs=1e-8)


def test_sample_manifold_rows(setup32):
    d = bump_direction(setup32)
    rows = sample_manifold([d, np.ones(3)], [0.0], ProbeConfig(), setup32)
    assert len(rows) == 2
    assert rows[0]["h"] == 0.0 and rows[0]["error"] == ""
    assert rows[0]["classification"] == "Disperses"
    assert rows[1]["error"] != ""
