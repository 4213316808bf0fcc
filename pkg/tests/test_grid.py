import numpy as np
import pytest
from hypothesis import given

from semiflow.grid import Grid, GridError, check_density, check_tangent, make_grid

from conftest import band_limited, seeds


def test_nodes_uniform():
    g = make_grid(4)
    np.testing.assert_allclose(g.nodes, [0, np.pi / 2, np.pi, 3 * np.pi / 2], atol=0)
    assert make_grid(8, 1.0).nodes[3] == 0.375
    assert g.nodes[0] == 0.0 and np.all(np.diff(make_grid(64).nodes) > 0)


@pytest.mark.parametrize("n, length, msg", [
    (5, 2 * np.pi, "n must be even"),
    (2, 2 * np.pi, "n must be at least 4"),
    (8, 0.0, "length must be positive"),
    (8, -1.0, "length must be positive"),
    (8.0, 1.0, "n must be an integer"),
])
def test_rejects_bad_grids(n, length, msg):
    with pytest.raises(GridError, match=msg):
        make_grid(n, length)


def test_defaults():
    g = make_grid()
    assert g.n_points == 256 and g.length == 2 * np.pi


def test_grid_immutable_and_hashable():
    g = make_grid(16)
    with pytest.raises(Exception):
        g.n_points = 8
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0
    assert g == Grid(16) and hash(g) == hash(Grid(16))


@pytest.mark.parametrize("n", [8, 16, 64])
@pytest.mark.parametrize("length", [2 * np.pi, 1.0, 7.5])
def test_deriv_of_sine(n, length):
    g = make_grid(n, length)
    w = 2 * np.pi / length
    err = np.abs(g.deriv(np.sin(w * g.nodes), 1) - w * np.cos(w * g.nodes)).max()
    assert err <= 1e-12 * max(1.0, w)


def test_deriv_constant_and_order_zero(grid64):
    c = np.full(64, 3.7)
    for k in (1, 2, 3):
        assert np.abs(grid64.deriv(c, k)).max() <= 1e-13
    f = np.sin(grid64.nodes)
    out = grid64.deriv(f, 0)
    assert np.array_equal(out, f) and out is not f


def test_deriv_exp_sin_against_fine_grid_and_closed_form():
    coarse, fine = make_grid(64), make_grid(4096)
    # modes of exp(sin x) past 256 sit below 1e-300; dropping them removes the
    # kappa^2-amplified roundoff of the fine transform from the reference
    fh = np.fft.rfft(np.exp(np.sin(fine.nodes)))
    fh[257:] = 0.0
    ref = np.fft.irfft(fh * fine.symbol(2), n=4096)[::64]
    got = coarse.deriv(np.exp(np.sin(coarse.nodes)), 2)
    x = coarse.nodes
    exact = (np.cos(x) ** 2 - np.sin(x)) * np.exp(np.sin(x))
    assert np.abs(got - ref).max() <= 1e-10
    assert np.abs(got - exact).max() <= 1e-10


def test_odd_derivative_kills_nyquist():
    g = make_grid(16)
    nyq = np.cos(8 * g.nodes)
    assert np.abs(g.deriv(nyq, 1)).max() <= 1e-13
    assert np.abs(g.deriv(nyq, 2) + 64 * nyq).max() <= 1e-10


def test_integrate_examples():
    g = make_grid(16)
    assert abs(g.integrate(np.ones(16)) - 2 * np.pi) <= 1e-14
    assert abs(g.integrate(np.sin(g.nodes))) <= 1e-14
    assert abs(g.integrate(np.sin(g.nodes) ** 2) - np.pi) <= 1e-13
    assert abs(g.mean(np.full(16, 2.0)) - 2.0) <= 1e-15


def test_interp_examples(grid64):
    assert abs(grid64.interp(np.cos(grid64.nodes), [np.pi / 3])[0] - 0.5) <= 1e-12
    assert abs(grid64.interp(np.sin(grid64.nodes), [2 * np.pi + np.pi / 2])[0] - 1.0) <= 1e-12
    assert abs(grid64.interp(np.sin(grid64.nodes), [-np.pi / 2])[0] + 1.0) <= 1e-12


def test_interp_nyquist_is_cosine():
    g = make_grid(8)
    f = np.cos(4 * g.nodes)
    xs = np.array([0.1, 0.7, 2.0])
    np.testing.assert_allclose(g.interp(f, xs), np.cos(4 * xs), atol=1e-13)


def test_dealias_mask():
    g = make_grid(12)
    f = np.cos(4 * g.nodes) + np.cos(5 * g.nodes) + np.sin(g.nodes)
    np.testing.assert_allclose(g.dealias(f), np.cos(4 * g.nodes) + np.sin(g.nodes), atol=1e-14)


def test_diff_matrix_matches_deriv(grid64):
    f = np.exp(np.cos(grid64.nodes))
    for k in (1, 2, 3):
        np.testing.assert_allclose(grid64.diff_matrix(k) @ f, grid64.deriv(f, k), atol=1e-10)


def test_stacked_fields(grid64):
    x = grid64.nodes
    stack = np.stack([np.sin(x), np.cos(2 * x)])
    np.testing.assert_allclose(grid64.deriv(stack, 1), [np.cos(x), -2 * np.sin(2 * x)], atol=1e-12)


def test_mismatched_field_rejected(grid64):
    with pytest.raises(GridError):
        grid64.deriv(np.zeros(32))


def test_density_and_tangent_checks(grid64):
    with pytest.raises(GridError, match="strictly positive"):
        check_density(grid64, np.zeros(64))
    with pytest.raises(GridError, match="non-finite"):
        check_density(grid64, np.full(64, np.nan))
    with pytest.raises(GridError, match="tangent must have zero mean"):
        check_tangent(grid64, 0.1 + np.cos(grid64.nodes))
    check_tangent(grid64, np.cos(grid64.nodes))


@given(seeds)
def test_deriv_linear(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(64)
    f, h = band_limited(rng, g), band_limited(rng, g)
    a, b = rng.normal(size=2)
    kmax = g.wavenumbers[-1]
    for k in (1, 2, 3):
        lhs = g.deriv(a * f + b * h, k)
        rhs = a * g.deriv(f, k) + b * g.deriv(h, k)
        # relative to the operator norm kmax^k times the input size
        scale = kmax ** k * (abs(a) * np.abs(f).max() + abs(b) * np.abs(h).max())
        assert np.abs(lhs - rhs).max() <= 1e-13 * scale


@given(seeds)
def test_integration_by_parts(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(64, float(rng.uniform(0.5, 10)))
    f, h = rng.normal(size=(2, 64))  # full spectrum, Nyquist included
    lhs = g.integrate(g.deriv(f, 1) * h)
    rhs = -g.integrate(f * g.deriv(h, 1))
    scale = g.norm(g.deriv(f, 1)) * g.norm(h)
    assert abs(lhs - rhs) <= 1e-11 * scale


@given(seeds)
def test_derivatives_compose(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(32)
    f = rng.normal(size=32)
    # with the Nyquist mode removed, odd and even orders compose exactly
    f = f - (np.fft.rfft(f)[-1].real / 32) * np.cos(16 * g.nodes)
    for i, j in [(1, 1), (1, 2), (2, 2), (2, 3)]:
        lhs = g.deriv(g.deriv(f, i), j)
        rhs = g.deriv(f, i + j)
        assert np.abs(lhs - rhs).max() <= 1e-11 * max(1.0, np.abs(rhs).max())


@given(seeds)
def test_interp_reproduces_nodes(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(32, float(rng.uniform(0.5, 10)))
    f = rng.normal(size=32)
    assert np.abs(g.interp(f, g.nodes) - f).max() <= 1e-13 * max(1.0, np.abs(f).max())
