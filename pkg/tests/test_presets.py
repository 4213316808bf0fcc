import numpy as np
import pytest

from semiflow.dynamics import State, energy, rhs_velocity
from semiflow.grid import make_grid
from semiflow.potential import InternalEnergy, Quadratic, Zero
from semiflow.presets import (
    PRESET_NAMES,
    PresetError,
    burgers_characteristics,
    displacement_density,
    linearized_matrix,
    make_preset,
    mode_frequencies,
)

# kappa / sqrt(1 + kappa^2 / 3), evaluated once in double precision
SGN_FREQ = {1: 0.8660254037844387, 2: 1.3093073414159544, 3: 1.5}


def test_preset_table():
    b = make_preset("burgers")
    assert b.order == 0 and b.potential == Zero() and b.coefficients.coeffs[0].terms == ((1.0, 1),)
    ch = make_preset("epdiff_h1")
    assert ch.order == 1 and ch.coefficients.is_constant
    sw = make_preset("shallow_water")
    assert sw.potential == Quadratic(1.0)
    ce = make_preset("compressible_euler", [(0.25, 2)])
    assert ce.potential == InternalEnergy([(0.25, 2)])
    sgn = make_preset("sgn")
    assert sgn.coefficients.coeffs[1].terms == ((1.0 / 3.0, 3),)
    with pytest.raises(PresetError, match="unknown preset"):
        make_preset("kdv")


def test_sgn_kinetic_energy(grid64):
    x = grid64.nodes
    rho, u = 1 + 0.3 * np.cos(x), np.sin(2 * x)
    mdl = make_preset("sgn")
    kinetic = energy(mdl, State(0.0, rho, u, grid64)) - 0.5 * grid64.integrate(rho ** 2)
    expected = 0.5 * grid64.integrate(rho * u ** 2 + rho ** 3 / 3 * grid64.deriv(u) ** 2)
    assert abs(kinetic - expected) <= 1e-12


def test_default_internal_energy_is_shallow_water(grid64):
    rng = np.random.default_rng(0)
    rho = 1 + 0.2 * np.cos(grid64.nodes)
    u = 0.3 * np.sin(grid64.nodes)
    a = rhs_velocity(make_preset("compressible_euler"), State(0.0, rho, u, grid64))
    b = rhs_velocity(make_preset("shallow_water"), State(0.0, rho, u, grid64))
    np.testing.assert_allclose(a[1], b[1], atol=1e-13)


def test_burgers_velocity_reduces_to_transport(grid64):
    x = grid64.nodes
    u = 0.4 * np.sin(x) + 0.1 * np.cos(3 * x)
    _, u_t = rhs_velocity(make_preset("burgers"), State(0.0, 1 + 0.3 * np.cos(x), u, grid64))
    np.testing.assert_allclose(u_t, -u * grid64.deriv(u), atol=1e-12)


def test_characteristics_trivial_cases(grid64):
    u0 = 0.3 * np.sin(grid64.nodes)
    assert np.array_equal(burgers_characteristics(grid64, u0, 0.0), u0)
    np.testing.assert_allclose(burgers_characteristics(grid64, np.full(64, 0.7), 3.0), 0.7, atol=1e-15)
    with pytest.raises(PresetError, match="post-breaking"):
        burgers_characteristics(grid64, np.sin(grid64.nodes), 1.0)


def test_characteristics_satisfy_implicit_relation(grid64):
    x = grid64.nodes
    u = burgers_characteristics(grid64, 0.5 * np.sin(x), 1.5)
    # u(y) = u0(y - t u(y)) pointwise
    np.testing.assert_allclose(u, 0.5 * np.sin(x - 1.5 * u), atol=1e-13)


def test_displacement_density_conserves_mass(grid64):
    x = grid64.nodes
    rho = displacement_density(grid64, np.ones(64), 0.05 * -np.sin(x), 0.5)
    assert abs(grid64.integrate(rho) - 2 * np.pi) <= 1e-12


def test_linearized_burgers_has_no_restoring_force():
    g = make_grid(16)
    vals = np.linalg.eigvals(linearized_matrix(make_preset("burgers"), 1.0, g))
    assert np.abs(vals.real).max() <= 1e-6
    assert np.abs(vals.imag).max() <= 1e-6


@pytest.mark.parametrize("kappa", [1, 2, 3])
def test_linearized_dispersion(kappa):
    g = make_grid(32)
    sw = mode_frequencies(linearized_matrix(make_preset("shallow_water"), 1.0, g), g)[kappa]
    np.testing.assert_allclose(np.sort(np.abs(sw.imag)), kappa, rtol=1e-6)
    assert np.abs(sw.real).max() <= 1e-6
    sgn = mode_frequencies(linearized_matrix(make_preset("sgn"), 1.0, g), g)[kappa]
    np.testing.assert_allclose(np.abs(sgn.imag), SGN_FREQ[kappa], rtol=1e-6)


def test_linearized_rejects_bad_background():
    with pytest.raises(PresetError):
        linearized_matrix(make_preset("sgn"), 0.0, make_grid(8))


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_every_preset_builds(name):
    assert make_preset(name).label == name
