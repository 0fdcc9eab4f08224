import math

import numpy as np
import pytest

from tvburgers import parabolic1d as Q
from tvburgers import profiles as P
from tvburgers.errors import DegenerateProjection, NonPositiveF, StabilityViolated
from tvburgers.numerics import Grid1D
from tvburgers.parabolic1d import Scheme

FRAME = P.SelfSimilarFrame(i=1, k=2)


def _const_state(c, scheme, n=9):
    grid = Grid1D.uniform(0.0, 1.0, n)
    return Q.ParabolicState(0.0, np.full(n, c), np.full(n, 6.0), grid, FRAME, scheme, "Y", "flat")


def test_logistic_limit():
    n = 6932
    s_end = math.log(2.0)
    sch = Scheme(ds=s_end / n, bc="one_sided_outflow", drift=False, diffusion=False)
    st = Q.advance(_const_state(0.5, sch), s_end)
    assert np.max(np.abs(st.f - 1.0 / 3.0)) < 1e-6


def test_unit_fixed_point():
    g = Q.half_grid(30.0)
    Y = g.nodes
    sch = Scheme(ds=1e-2, bc="one_sided_outflow", factor_g=False)
    st = Q.ParabolicState(10.0, np.ones_like(Y), 6.0 * np.ones_like(Y), g, FRAME, sch, "Y", "flat")
    for _ in range(5):
        prev = st.f
        st = Q.step(st)
        assert np.max(np.abs(st.f - prev)) < 1e-10


def _heat_oracle(Y, s, t0=1.0):
    """Independent reference: the heat kernel started from exp(-Y^2/(4 t0))."""
    return math.sqrt(t0 / (t0 + s)) * np.exp(-Y**2 / (4 * (t0 + s)))


def test_g_heat_flow_against_kernel():
    grid = Q.half_grid(30.0, dxi=0.01)
    Y = grid.nodes
    sch = Scheme(ds=1e-3, bc="one_sided_outflow", drift=False, couple_f=False, factor_g=False)
    st = Q.ParabolicState(0.0, np.ones_like(Y), _heat_oracle(Y, 0.0), grid, FRAME, sch, "Y", "flat")
    for s_stop in (0.5, 1.0):
        st = Q.advance(st, s_stop)
        assert np.max(np.abs(st.g - _heat_oracle(Y, s_stop))) < 1e-4
    # variance grows by exactly 2 per unit time
    w = np.trapezoid(st.g, Y)
    var = np.trapezoid(Y**2 * st.g, Y) / w
    assert var == pytest.approx(2.0 * 2.0, rel=1e-3)


def test_stationary_residual_is_diffusion_only():
    Y = np.linspace(-40.0, 40.0, 801)
    for s in (8.0, 12.0, 20.0):
        r, d = Q.stationary_residual(2, s, Y)
        assert np.max(np.abs(r - d)) < 1e-8


def test_reaction_bound():
    with pytest.raises(StabilityViolated):
        Q.step(_const_state(0.5, Scheme(ds=0.3, bc="one_sided_outflow")))


def test_cfl_bound():
    st = Q.flat_initial_state(k=2, s0=10.0, scheme=Scheme(ds=0.2))
    with pytest.raises(StabilityViolated):
        Q.step(st)


def test_quench_reported():
    sch = Scheme(ds=0.01, bc="one_sided_outflow", drift=False, diffusion=False)
    st = _const_state(1e-3, sch)
    st = st.copy_with(f=np.full(st.grid.n, -1e-3), g=None)
    with pytest.raises(NonPositiveF):
        Q.step(st)


def test_scheme_guards():
    with pytest.raises(ValueError):
        Scheme(bc="periodic")
    with pytest.raises(ValueError):
        Scheme(ds=0.0)
    with pytest.raises(ValueError):
        Q.run_flat(s0=5.0)
    with pytest.raises(ValueError):
        Q.run_stable(s0=10.0)


def test_even_symmetry_by_construction():
    st = Q.flat_initial_state(k=2, s0=10.0)
    proj = Q.RhoProjector(st.Y(), 4)
    u = proj.mirror(Q.step(st).f)
    assert np.array_equal(u, u[::-1])


def test_comparison_sanity():
    ds = 0.01
    grid = Q.half_grid(max(20.0, 4.0 * math.exp(0.25 * 14.0)))
    Y = grid.nodes
    Z = math.exp(-0.25 * 10.0) * Y
    F = P.f_k(2, 1.0, Z)
    st = Q.ParabolicState(10.0, F, 6.0 * F**4, grid, FRAME, Scheme(ds=ds), "Y", "flat")
    top = []
    Q.advance(st, 14.0, lambda x: top.append(float(x.f.max())), 10)
    assert max(top) <= 1.0 + 10.0 * ds


# --------------------------------------------------------------------------
# projections


def test_modulation_exact_profile():
    st = Q.flat_initial_state(k=2, s0=10.0, a0=1.3)
    m = Q.extract_modulation(st)
    assert m.a == pytest.approx(1.3, abs=1e-12)
    assert np.max(np.abs(m.c)) < 1e-12


@pytest.mark.parametrize("ell", (0, 2))
def test_modulation_picks_up_mode(ell):
    d = 1e-6
    st = Q.flat_initial_state(k=2, s0=10.0, a0=1.3)
    st = st.copy_with(f=st.f + d * P.hermite(ell, st.Y()))
    m = Q.extract_modulation(st)
    expect = np.zeros(4)
    expect[ell] = d
    assert m.a == pytest.approx(1.3, abs=1e-12)
    assert np.max(np.abs(m.c - expect)) < 1e-10


def test_stable_remainder_orthogonal():
    st = Q.stable_initial_state(perturbation=lambda Y: 1e-3 * np.exp(-Y**2 / 10) + 1e-4 * np.cos(Y))
    m = Q.extract_modulation(st)
    assert abs(m.remainder_ip[0]) < 1e-12 and abs(m.remainder_ip[2]) < 1e-12


def test_projector_needs_gaussian_window():
    with pytest.raises(DegenerateProjection):
        Q.RhoProjector(np.linspace(0.0, 10.0, 101), 4)


def test_unstable_constant_mode_grows_like_exp_s():
    st = Q.flat_initial_state(k=2, s0=10.0, perturbation=lambda Y: 1e-3 * P.hermite(0, Y))
    proj = Q.RhoProjector(st.Y(), 4)
    out = []

    def rec(x):
        out.append((x.s, Q.extract_modulation(x, projector=proj).c[0]))

    rec(st)
    Q.advance(st, 13.0, rec, 50)
    s, c = np.array(out).T
    slope = np.polyfit(s, np.log(np.abs(c)), 1)[0]
    assert slope == pytest.approx(1.0, rel=0.2)


def test_shooting_brackets_the_sign_change():
    make = lambda d: Q.stable_initial_state(s0=20.0, s_end=24.0, perturbation=lambda Y, d=d: d + 0 * Y)
    d, it = Q.shoot_constant(make, lambda s: 1.0, 24.0, bracket=(-1e-2, 1e-2), width=1e-6)
    assert abs(d) < 1e-2 and it > 0
