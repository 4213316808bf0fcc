import numpy as np
import pytest
from hypothesis import given, strategies as st

from semiflow.grid import make_grid
from semiflow.inertia import (
    CoefficientSet,
    IndefiniteOperatorError,
    InertiaSolver,
    ModelSpec,
    RefreshingSolver,
    apply_A,
    apply_Aprime,
    aprime_star,
    assemble_A,
    check_positive_definite,
    solve_A,
)
from semiflow.polynomial import InertiaError, Polynomial
from semiflow.presets import PRESET_NAMES, make_preset

from conftest import band_limited, positive_density, seeds

RHO = Polynomial.monomial(1.0, 1)
ONE = Polynomial.constant(1.0)


def model(*coeffs):
    return ModelSpec(CoefficientSet(tuple(coeffs)))


def random_model(rng, k, constant_ok=True):
    polys = []
    for _ in range(k + 1):
        powers = {int(p) for p in rng.choice(4, size=rng.integers(1, 4), replace=False)}
        if not constant_ok:
            powers.add(int(rng.integers(1, 4)))
        polys.append(Polynomial(tuple((float(rng.uniform(0.1, 1.0)), p) for p in sorted(powers))))
    return ModelSpec(CoefficientSet(tuple(polys)))


def test_polynomial_merges_and_derivative():
    p = Polynomial(((1.0, 2), (0.5, 2), (0.0, 5), (2.0, 0)))
    assert p.terms == ((2.0, 0), (1.5, 2))
    np.testing.assert_allclose(p(np.array([2.0])), [8.0])
    np.testing.assert_allclose(p.derivative(np.array([2.0])), [6.0])
    assert Polynomial(()).is_zero and ONE.is_constant and not RHO.is_constant


@pytest.mark.parametrize("terms", [((-1.0, 1),), ((1.0, -1),), ((1.0, 1.5),), ((np.inf, 1),)])
def test_polynomial_rejects_bad_terms(terms):
    with pytest.raises(InertiaError):
        Polynomial(terms)


def test_coefficient_validation():
    with pytest.raises(InertiaError, match="one of a0, ak must be nonzero"):
        CoefficientSet((Polynomial(()), RHO, Polynomial(())))
    with pytest.raises(InertiaError, match="at least one"):
        CoefficientSet(())
    cs = CoefficientSet.from_terms(2, [(0, 1.0, 1), (2, 1.0, 2)])
    assert cs.order == 2 and cs.definite and cs.coeffs[1].is_zero
    assert not CoefficientSet((Polynomial(()), RHO)).definite
    assert CoefficientSet.from_terms(2, cs.to_terms()) == cs


def test_apply_A_examples(grid64):
    x = grid64.nodes
    u = np.sin(x)
    np.testing.assert_allclose(apply_A(model(ONE, ONE), grid64, np.ones(64), u), 2 * u, atol=1e-12)
    rho = 1 + 0.5 * np.cos(x)
    np.testing.assert_allclose(apply_A(model(RHO), grid64, rho, u), rho * u, atol=1e-14)
    np.testing.assert_allclose(apply_A(model(ONE, RHO), grid64, np.full(64, 2.0), u), 3 * u, atol=1e-12)


def test_assemble_examples():
    g = make_grid(8)
    rho = 1 + 0.3 * np.sin(g.nodes)
    np.testing.assert_allclose(assemble_A(model(RHO), g, rho), np.diag(rho), atol=1e-15)
    eig = np.sort(np.linalg.eigvalsh(assemble_A(model(ONE, ONE), g, np.ones(8))))
    # the first derivative has a zero symbol at Nyquist, so that mode keeps eigenvalue a0
    kappa = np.array([0, 1, 1, 2, 2, 3, 3, 0])
    np.testing.assert_allclose(eig, np.sort(1 + kappa ** 2), atol=1e-12)


def test_solve_examples(grid64):
    x = grid64.nodes
    rho = 1 + 0.5 * np.cos(x)
    m = np.sin(x) + 0.2
    np.testing.assert_allclose(solve_A(model(RHO), grid64, rho, m), m / rho, atol=1e-15)
    np.testing.assert_allclose(solve_A(model(ONE, ONE), grid64, np.ones(64), 2 * np.sin(x)), np.sin(x), atol=1e-13)


@pytest.mark.parametrize("method", ["auto", "direct", "cg"])
def test_solve_round_trip_k2(method, grid64):
    rng = np.random.default_rng(5)
    mdl = model(RHO, Polynomial(()), Polynomial.monomial(1.0, 2))
    rho = positive_density(rng, grid64)
    m = band_limited(rng, grid64)
    u = solve_A(mdl, grid64, rho, m, method=method)
    res = np.linalg.norm(apply_A(mdl, grid64, rho, u) - m) / np.linalg.norm(m)
    assert res <= 1e-9


def test_solver_paths_agree(grid64):
    rng = np.random.default_rng(1)
    rho = positive_density(rng, grid64)
    m = band_limited(rng, grid64)
    for name in PRESET_NAMES:
        mdl = make_preset(name)
        ref = InertiaSolver(mdl, grid64, rho, method="direct")(m)
        for method in ("auto", "cg"):
            np.testing.assert_allclose(InertiaSolver(mdl, grid64, rho, method=method)(m), ref, atol=1e-10)


def test_refreshing_solver_tracks_density(grid64):
    rng = np.random.default_rng(2)
    mdl = make_preset("sgn")
    solve = RefreshingSolver(mdl, grid64)
    rho = positive_density(rng, grid64)
    for _ in range(6):
        rho = rho * (1 + 0.01 * band_limited(rng, grid64, scale=0.1))
        m = band_limited(rng, grid64)
        u = solve(rho, m)
        assert np.linalg.norm(apply_A(mdl, grid64, rho, u) - m) <= 1e-11 * np.linalg.norm(m)


def test_guard_on_degenerate_density(grid64):
    rho = np.ones(64)
    rho[3] = 1e-14
    with pytest.raises(IndefiniteOperatorError):
        solve_A(make_preset("sgn"), grid64, rho, np.ones(64))


def test_aprime_examples(grid64):
    x = grid64.nodes
    rho, u, v, s = 1 + 0.5 * np.cos(x), np.sin(x), np.cos(2 * x), np.sin(3 * x)
    np.testing.assert_allclose(apply_Aprime(model(RHO), grid64, rho, u, s), s * u, atol=1e-15)
    np.testing.assert_allclose(aprime_star(model(RHO), grid64, rho, u, v), u * v, atol=1e-15)
    const = model(ONE, ONE, Polynomial.constant(0.5))
    assert not np.any(apply_Aprime(const, grid64, rho, u, s))
    assert not np.any(aprime_star(const, grid64, rho, u, v))


@given(seeds, st.integers(0, 3))
def test_aprime_matches_central_difference(seed, k):
    rng = np.random.default_rng(seed)
    g = make_grid(32)
    mdl = random_model(rng, k)
    rho, u, s = positive_density(rng, g), band_limited(rng, g), band_limited(rng, g, scale=0.2)
    eps = 1e-6
    fd = (apply_A(mdl, g, rho + eps * s, u) - apply_A(mdl, g, rho - eps * s, u)) / (2 * eps)
    exact = apply_Aprime(mdl, g, rho, u, s)
    assert np.linalg.norm(fd - exact) <= 1e-6 * max(np.linalg.norm(exact), 1e-300) + 1e-9


@given(seeds, st.integers(0, 3))
def test_adjoint_identity(seed, k):
    rng = np.random.default_rng(seed)
    g = make_grid(64)
    mdl = random_model(rng, k, constant_ok=False)
    rho = positive_density(rng, g)
    u, v, s = (band_limited(rng, g) for _ in range(3))
    a = apply_Aprime(mdl, g, rho, u, s)
    b = aprime_star(mdl, g, rho, u, v)
    lhs, rhs = g.inner(a, v), g.inner(s, b)
    assert abs(lhs - rhs) <= 1e-10 * (g.norm(a) * g.norm(v) + g.norm(s) * g.norm(b))


@given(seeds, st.integers(0, 3))
def test_symmetric_positive_consistent(seed, k):
    rng = np.random.default_rng(seed)
    g = make_grid(32)
    mdl = random_model(rng, k)
    rho = positive_density(rng, g)
    u, v = band_limited(rng, g), band_limited(rng, g)
    au, av = apply_A(mdl, g, rho, u), apply_A(mdl, g, rho, v)
    assert abs(g.inner(v, au) - g.inner(u, av)) <= 1e-11 * g.norm(au) * g.norm(v) + 1e-300
    assert g.inner(u, au) > 0
    mat = assemble_A(mdl, g, rho)
    assert np.abs(mat - mat.T).max() <= 1e-10 * np.linalg.norm(mat, 2)
    np.testing.assert_allclose(mat @ u, au, atol=1e-11 * np.abs(au).max())
    assert check_positive_definite(mdl, g, rho) > 0


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_symmetric_positive(name):
    g = make_grid(64)
    rng = np.random.default_rng(hash(name) % 2**32)
    rho = positive_density(rng, g)
    mat = assemble_A(make_preset(name), g, rho)
    assert np.abs(mat - mat.T).max() <= 1e-10 * np.linalg.norm(mat, 2)
    assert np.linalg.eigvalsh(mat)[0] > 0


def test_stacked_apply_and_solve(grid64):
    rng = np.random.default_rng(3)
    mdl = make_preset("sgn")
    rho = positive_density(rng, grid64)
    us = np.stack([band_limited(rng, grid64) for _ in range(3)])
    ms = apply_A(mdl, grid64, rho, us)
    for u, m in zip(us, ms):
        np.testing.assert_allclose(apply_A(mdl, grid64, rho, u), m, atol=1e-13)
    np.testing.assert_allclose(InertiaSolver(mdl, grid64, rho)(ms), us, atol=1e-10)
