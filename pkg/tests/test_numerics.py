import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvburgers.errors import DomainTooSmall, MaxIters, NoBracket, ZeroPivot
from tvburgers.numerics import (Grid1D, Tolerance, TridiagonalSystem, fd_derivative, grid_derivative,
                                invert_monotone, monotone_cubic, solve_tridiagonal, weighted_inner_product)


def phi(p):
    return -p - p**3


# --- root finding ---------------------------------------------------------

def test_invert_odd_root():
    assert invert_monotone(phi, (-1.0, 1.0), 0.0) == pytest.approx(0.0, abs=1e-14)


def test_invert_known_point():
    assert invert_monotone(phi, (-2.0, 0.0), 2.0) == pytest.approx(-1.0, abs=1e-13)


def test_invert_cube_root():
    assert invert_monotone(lambda x: x**3, (0.0, 3.0), 8.0) == pytest.approx(2.0, abs=1e-13)


def test_invert_no_bracket():
    with pytest.raises(NoBracket):
        invert_monotone(lambda x: x**3, (3.0, 4.0), 8.0)


def test_invert_max_iters():
    with pytest.raises(MaxIters):
        invert_monotone(lambda x: x**3, (0.0, 3.0), 8.0, Tolerance(abs=0.0, rel=1e-300, max_iters=3))


def test_invert_vectorised():
    t = np.linspace(-30.0, 30.0, 101)
    r = invert_monotone(phi, (np.full_like(t, -4.0), np.full_like(t, 4.0)), t)
    assert np.max(np.abs(phi(r) - t)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(-40.0, 40.0))
def test_invert_idempotent(target):
    r = invert_monotone(phi, (-4.0, 4.0), target)
    again = invert_monotone(phi, (r, 4.0) if phi(r) >= target else (-4.0, r), target)
    assert again == pytest.approx(r, abs=1e-12)


def test_tolerance_guard():
    with pytest.raises(ValueError):
        Tolerance(abs=0.0, rel=0.0)


# --- tridiagonal ----------------------------------------------------------

@pytest.mark.parametrize("backend", ["thomas", "lapack"])
def test_identity_system(backend):
    r = np.arange(6.0)
    sys_ = TridiagonalSystem(np.zeros(5), np.ones(6), np.zeros(5), r)
    assert np.array_equal(solve_tridiagonal(sys_, backend), r)


@pytest.mark.parametrize("backend", ["thomas", "lapack"])
def test_two_by_two(backend):
    x = solve_tridiagonal(TridiagonalSystem([1.0], [2.0, 2.0], [1.0], [3.0, 3.0]), backend)
    assert np.allclose(x, [1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("backend", ["thomas", "lapack"])
def test_laplacian_vs_dense(backend, rng):
    n = 50
    lo, di, up = -np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)
    rhs = rng.standard_normal(n)
    A = np.diag(di) + np.diag(lo, -1) + np.diag(up, 1)
    x = solve_tridiagonal(TridiagonalSystem(lo, di, up, rhs), backend)
    assert np.max(np.abs(x - np.linalg.solve(A, rhs))) < 1e-12


def test_zero_pivot():
    with pytest.raises(ZeroPivot):
        solve_tridiagonal(TridiagonalSystem([1.0], [0.0, 1.0], [1.0], [1.0, 1.0]))


@pytest.mark.parametrize("n", [10, 1000, 10_000])
def test_residual_dominant(n, rng):
    lo = rng.uniform(-1, 1, n - 1)
    up = rng.uniform(-1, 1, n - 1)
    di = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal(n)
    s = TridiagonalSystem(lo, di, up, rhs)
    assert s.is_diagonally_dominant()
    for backend in ("thomas", "lapack"):
        x = solve_tridiagonal(s, backend)
        assert np.max(np.abs(s.matvec(x) - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_lapack_multiple_rhs(rng):
    n = 30
    lo, di, up = -np.ones(n - 1), 3.0 * np.ones(n), -np.ones(n - 1)
    B = rng.standard_normal((n, 4))
    X = solve_tridiagonal(TridiagonalSystem(lo, di, up, B), "lapack")
    for j in range(4):
        xj = solve_tridiagonal(TridiagonalSystem(lo, di, up, B[:, j]), "thomas")
        assert np.allclose(X[:, j], xj, atol=1e-14)


# --- weighted quadrature ----------------------------------------------------

@pytest.fixture
def ygrid():
    return Grid1D.uniform(-14.0, 14.0, 2801)


def test_rho_one_one(ygrid):
    one = np.ones(ygrid.n)
    assert weighted_inner_product(one, one, ygrid) == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-13)


def test_rho_odd(ygrid):
    Y = ygrid.nodes
    assert abs(weighted_inner_product(Y, np.ones_like(Y), ygrid)) < 1e-14


def test_rho_second_moment(ygrid):
    Y = ygrid.nodes
    assert weighted_inner_product(Y, Y, ygrid) == pytest.approx(4.0 * math.sqrt(math.pi), rel=1e-12)


def test_rho_domain_too_small():
    g = Grid1D.uniform(-10.0, 10.0, 201)
    with pytest.raises(DomainTooSmall):
        weighted_inner_product(np.ones(g.n), np.ones(g.n), g)


def test_rho_error_estimate(ygrid):
    one = np.ones(ygrid.n)
    val, err = weighted_inner_product(one, one, ygrid, return_error=True)
    assert abs(val - 2.0 * math.sqrt(math.pi)) <= err + 1e-14


def test_rho_bilinear_symmetric(ygrid, rng):
    f, g, h = (rng.standard_normal(ygrid.n) for _ in range(3))
    a, b = rng.standard_normal(2)
    ip = lambda u, v: weighted_inner_product(u, v, ygrid)
    assert ip(f, g) == ip(g, f)
    assert ip(a * f + b * h, g) == pytest.approx(a * ip(f, g) + b * ip(h, g), rel=1e-12, abs=1e-13)


# --- grids and stencils ---------------------------------------------------

def test_grid_invariants():
    g = Grid1D.sinh(20.0, 41, core=2.0)
    assert g.nodes[0] == -20.0 and g.nodes[-1] == 20.0 and g.nodes[20] == 0.0
    assert np.all(np.diff(g.nodes) > 0)
    with pytest.raises(ValueError):
        Grid1D.uniform(0.0, 1.0, 4)


def test_index_coordinate_roundtrip():
    g = Grid1D.sinh(20.0, 41, core=2.0)
    assert np.allclose(g.index_coordinate(g.nodes), np.arange(41), atol=1e-12)


def test_fd_derivative_sin():
    x = np.linspace(-2, 2, 9)
    for m, tol in ((1, 1e-9), (2, 1e-8), (3, 1e-5)):
        exact = np.sin(x + m * math.pi / 2)
        assert np.max(np.abs(fd_derivative(np.sin, x, m) - exact)) < tol


def test_grid_derivative_polynomial():
    g = Grid1D.uniform(-1.0, 1.0, 41)
    x = g.nodes
    assert np.max(np.abs(grid_derivative(x**3, g) - 3 * x**2)) < 1e-12


def test_monotone_cubic_exact_on_nodes_and_linear():
    y = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    t = np.linspace(0, 5, 23)
    assert np.allclose(monotone_cubic(y, t), t, atol=1e-14)


def test_monotone_cubic_no_overshoot():
    y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    v = monotone_cubic(y, np.linspace(0, 5, 201))
    assert v.min() >= 0.0 and v.max() <= 1.0
