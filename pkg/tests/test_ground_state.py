import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab.errors import ConfigInvalid, InterpolationOutOfRange, NotConverged, ProfileTooWide
from nlslab.ground_state import (RadialGrid, alpha_derivative, grid_ground_state, lift_family, lift_to_grid,
                                 rescale_profile, shoot_central_value, solve_ground_state)
from nlslab.grid import Grid3D

# bisection on φ(0) for φ'' + 2φ'/r - φ + φ³ = 0 with an adaptive DOP853 integrator
# (rtol 1e-13), separating sign change from turning back up
PHI0_ORACLE = 4.337387679977013


def test_central_value_matches_shooting_oracle(profile1):
    assert profile1.central_value == pytest.approx(PHI0_ORACLE, abs=1e-9)
    assert profile1.residual_norm() <= 1e-9


def test_central_value_stable_across_resolutions(profile1, profile1_coarse):
    assert abs(profile1.central_value - profile1_coarse.central_value) < 1e-9


def test_shooting_bisection_alone(profile1):
    assert shoot_central_value(1.0) == pytest.approx(PHI0_ORACLE, rel=1e-6)


def test_alpha4_equals_rescaled_alpha1(profile1):
    # the roundoff floor of the sixth-order residual grows like α^{3/2}
    p4 = solve_ground_state(4.0, RadialGrid(15.0, 8192), tol=1e-8)
    # half the spacing, so 2r lands on the α = 1 nodes and no interpolation enters
    assert np.abs(p4.values - 2.0 * profile1.values).max() <= 1e-8


def test_mass_scaling(profile1):
    for a in (0.25, 4.0):
        p = rescale_profile(profile1, a, edge_tol=np.inf)
        assert p.mass() == pytest.approx(profile1.mass() / math.sqrt(a), rel=1e-6)


def test_rescale_identity(profile1):
    assert rescale_profile(profile1, 1.0) is profile1


def test_rescale_round_trip(profile1):
    back = rescale_profile(rescale_profile(profile1, 4.0), 1.0)
    inner = profile1.r < 15.0
    assert np.abs(back.values[inner] - profile1.values[inner]).max() <= 1e-8


def test_rescale_central_value(profile1):
    assert rescale_profile(profile1, 2.0).central_value == pytest.approx(math.sqrt(2) * profile1.central_value,
                                                                        rel=1e-14)


def test_rescale_refuses_to_extrapolate(profile1):
    with pytest.raises(InterpolationOutOfRange):
        rescale_profile(profile1, 0.01)


# the Hermite error grows like the fourth power of the dilation, so the bound holds up to α = 4
@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 4.0))
def test_rescale_group_property(profile1, a):
    there = rescale_profile(profile1, a)
    back = rescale_profile(there, 1.0, edge_tol=np.inf)
    inner = profile1.r < 30.0 / math.sqrt(a) - 1.0
    assert np.abs(back.values[inner] - profile1.values[inner]).max() <= 1e-8


def test_alpha_derivative_at_origin(profile1):
    assert profile1.d_alpha[0] == pytest.approx(profile1.central_value / 2.0, rel=1e-14)


def test_alpha_derivative_mass_identity(profile1):
    r = profile1.r
    lhs = 4 * np.pi * np.trapezoid(2 * profile1.values * profile1.d_alpha * r * r, r)
    assert lhs == pytest.approx(-0.5 * profile1.mass(), rel=1e-8)


def test_alpha_derivative_central_difference():
    base = solve_ground_state(1.0, RadialGrid(30.0, 4096))
    h = 1e-4
    up = solve_ground_state(1.0 + h, RadialGrid(30.0, 4096))
    dn = solve_ground_state(1.0 - h, RadialGrid(30.0, 4096))
    fd = (up.values - dn.values) / (2 * h)
    assert np.abs(fd - alpha_derivative(base)).max() <= 1e-6


def test_invalid_alpha():
    with pytest.raises(ConfigInvalid):
        solve_ground_state(0.0)


def test_unreachable_tolerance_reports_non_convergence():
    with pytest.raises(NotConverged):
        solve_ground_state(1.0, tol=1e-14)


# ------------------------------------------------------------ lifting

def test_lift_reflection_symmetry(profile1):
    g = Grid3D(32, 8.0)
    f = lift_to_grid(profile1, g)
    c = f[1:, 1:, 1:]  # nodes symmetric about the origin
    for axis in range(3):
        assert np.abs(c - np.flip(c, axis)).max() <= 1e-12


def test_lift_mass_matches_radial_quadrature(profile1):
    g = Grid3D(64, 8.0)
    f = lift_to_grid(profile1, g)
    assert np.sum(f * f) * g.dv == pytest.approx(profile1.mass(), rel=1e-4)


def test_lift_maximum_at_center_node(profile1):
    g = Grid3D(32, 8.0)
    c = g.x1d[18], g.x1d[13], g.x1d[20]
    f = lift_to_grid(profile1, g, center=c)
    assert np.unravel_index(np.argmax(f), f.shape) == (18, 13, 20)


def test_lift_family_tangents(profile1):
    g = Grid3D(32, 8.0)
    c = np.array([0.3, -0.2, 0.1])
    fam = lift_family(profile1, g, center=c)
    e = 1e-5
    for k in range(3):
        dc = np.zeros(3)
        dc[k] = e
        fd = (lift_to_grid(profile1, g, center=c - dc) - lift_to_grid(profile1, g, center=c + dc)) / (2 * e)
        assert np.abs(fam.grad[k] - fd).max() <= 1e-6 * profile1.central_value


def test_lift_rejects_box_too_small(profile1):
    with pytest.raises(ProfileTooWide):
        lift_to_grid(profile1, Grid3D(16, 1.0))


def test_grid_ground_state_is_discrete_fixed_point(profile1_coarse):
    g = Grid3D(32, 8.0)
    gs = grid_ground_state(1.0, g, profile=profile1_coarse)
    assert gs.residual <= 1e-9
    assert gs.field.max() == pytest.approx(PHI0_ORACLE, rel=0.05)
