import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvburgers import burgers1d as B
from tvburgers import profiles as P
from tvburgers.errors import DegeneracyUndetermined, NoNegativeSlope, PastBlowup


def test_minus_sin_report():
    r = B.shock_detect(B.minus_sin(), (-math.pi, math.pi))
    assert r.T == pytest.approx(1.0, abs=1e-12)
    assert abs(r.x0) < 1e-8 and abs(r.c) < 1e-8
    assert r.i == 1 and r.nondegenerate
    assert r.mu == pytest.approx(math.sqrt(1.0 / 6.0), abs=1e-12)


def test_psi1_report():
    r = B.shock_detect(B.psi1_data(), (-1.0, 1.0))
    assert r.T == pytest.approx(1.0, abs=1e-12)
    assert r.i == 1
    assert r.mu == pytest.approx(1.0, abs=1e-10)


def test_quintic_degenerate():
    r = B.shock_detect(B.polynomial_data([0, -1, 0, 0, 0, 1]), (-0.5, 0.5))
    assert r.i == 2 and not r.nondegenerate
    assert r.mu == pytest.approx(1.0, abs=1e-12)


def test_report_invariants():
    r = B.shock_detect(B.polynomial_data([0.3, -2.0, 0, 5.0]), (-1, 1))
    assert r.T == pytest.approx(-1.0 / r.slope)
    assert r.mu == pytest.approx((30.0 / (6 * 2.0**4)) ** 0.5, rel=1e-12)


def test_no_negative_slope():
    with pytest.raises(NoNegativeSlope):
        B.shock_detect(B.polynomial_data([0, 1.0, 0, 1.0]), (-1, 1))


def test_degeneracy_undetermined():
    # U0 = -x: every higher derivative vanishes
    with pytest.raises(DegeneracyUndetermined):
        B.shock_detect(B.polynomial_data([0, -1.0]), (-0.1, 0.1))


@settings(max_examples=20, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_galilean_covariance(xs, cs):
    base = B.shock_detect(B.minus_sin(), (-math.pi, math.pi))
    r = B.shock_detect(B.minus_sin().shifted(xs, cs), (xs - math.pi, xs + math.pi))
    assert r.x0 == pytest.approx(base.x0 + xs, abs=1e-8)
    assert r.c == pytest.approx(base.c + cs, abs=1e-8)
    assert r.T == pytest.approx(base.T, rel=1e-12)
    assert r.i == base.i and r.mu == pytest.approx(base.mu, rel=1e-10)


def test_time_zero_is_identity():
    x = np.linspace(-3, 3, 31)
    assert np.array_equal(B.evolve_characteristics(B.minus_sin(), 0.0, x, 1.0), -np.sin(x))


def test_linear_data_closed_form():
    U0 = B.polynomial_data([0, -1.0])
    x = np.linspace(-2, 2, 41)
    for t in (0.1, 0.5, 0.9):
        # unbounded data: the domain must contain the foot y = x/(1-t)
        U = B.evolve_characteristics(U0, t, x, 1.0, domain=(-25.0, 25.0))
        assert np.allclose(U, -x / (1 - t), atol=1e-12)


def test_past_blowup():
    with pytest.raises(PastBlowup):
        B.evolve_characteristics(B.minus_sin(), 1.0, 0.0, 1.0)
    r = B.shock_detect(B.minus_sin(), (-math.pi, math.pi))
    with pytest.raises(PastBlowup):
        B.rescaled_error(B.minus_sin(), r, 1.5)


def test_psi1_self_similar():
    U0 = B.psi1_data()
    t = 0.99
    tau = 1 - t
    X = np.linspace(-1, 1, 201)
    U = B.evolve_characteristics(U0, t, X * tau**1.5, 1.0)
    assert np.max(np.abs(U / tau**0.5 - P.psi(1, X))) < 0.05
    assert np.max(np.abs(U / tau**0.5 - P.psi(1, X))) < 1e-10


def test_conservation_along_characteristics(rng):
    U0 = B.minus_sin()
    for t in rng.uniform(0, 0.95, 8):
        y = rng.uniform(-3, 3, 50)
        x = y + t * U0(y)
        assert np.allclose(B.evolve_characteristics(U0, t, x, 1.0), U0(y), atol=1e-12)


def test_min_slope_law():
    U0 = B.minus_sin()
    r = B.shock_detect(U0, (-math.pi, math.pi))
    x = np.linspace(-0.2, 0.2, 4001)
    for t in (0.5, 0.9, 0.99, 1 - 1e-4):
        ms = B.min_slope(U0, t, r)
        assert -1.0 / ms == pytest.approx(r.T - t, rel=1e-4)
        # the sampled slope never undercuts the characteristic minimum
        assert np.min(B.evolve_slope(U0, t, x, r.T)) >= ms * (1 + 1e-9)


def test_rescaled_psi1_exact():
    U0 = B.psi1_data()
    r = B.shock_detect(U0, (-1, 1))
    for row in B.convergence_table(U0, r, range(2, 10)):
        assert row.ratio_sup < 1e-6


def test_rescaled_minus_sin_refines():
    U0 = B.minus_sin()
    r = B.shock_detect(U0, (-math.pi, math.pi))
    coarse = B.rescaled_error(U0, r, r.T - 1e-2)
    fine = B.rescaled_error(U0, r, r.T - 1e-4)
    assert fine.ratio_sup < coarse.ratio_sup


def test_exclusion_guard():
    U0 = B.psi1_data()
    r = B.shock_detect(U0, (-1, 1))
    with pytest.raises(ValueError):
        B.rescaled_error(U0, r, 0.5, window=(-1, 1), n_samples=3, exclusion=None)


def test_fd_initial_data_matches_analytic():
    f = lambda x, m=0: -np.sin(x)
    r = B.shock_detect(B.InitialData(f, analytic=False, h=1e-2), (-math.pi, math.pi))
    assert r.T == pytest.approx(1.0, abs=1e-6)
    assert r.i == 1


def test_dyadic_times():
    assert B.dyadic_times(1.0, range(2, 4)) == [0.75, 0.875]
