import math
from dataclasses import replace

import numpy as np
import pytest

from tvburgers import burgers2d as B
from tvburgers import profiles as P
from tvburgers import spectral as S
from tvburgers.errors import AxisOrderViolation, GridTooCoarse


@pytest.fixture(scope="module")
def state():
    return B.init_from_profiles(scheme=B.Scheme2D(nz=65))


def _mesh(st):
    return st.X[:, None], st.Z[None, :]


def test_scheme_needs_odd_sizes():
    with pytest.raises(ValueError):
        B.Scheme2D(nx=512)


def test_grid_symmetric_with_axis(state):
    X = state.X
    assert X[X.size // 2] == 0.0
    assert np.array_equal(X, -X[::-1])
    assert X[-1] == pytest.approx(20.0 * 257.0**1.5)


def test_initial_symmetry(state):
    w = state.w
    assert np.array_equal(w, -w[::-1, :])
    assert np.array_equal(w, w[:, ::-1])
    assert np.all(w[w.shape[0] // 2] == 0.0)


def test_zero_perturbation_traces(state):
    f, g = state.companion_full()
    fm, gm = B.trace_derivatives(state)
    assert np.max(np.abs(fm - f)) < 1e-6
    assert np.max(np.abs(gm - g)) < 1e-3


def test_theta_traces_match_closed_form(state):
    X, Z = _mesh(state)
    th = P.theta_2d(state.frame, X, Z)
    fm, gm = B.trace_derivatives(replace(state, w=th))
    F = P.f_k(2, 1.0, state.Z)
    assert np.max(np.abs(fm - F)) < 1e-6
    assert np.max(np.abs(gm - 6.0 * F**4)) < 1e-3
    assert B.truncation_floor(state) == pytest.approx(max(np.abs(fm - F).max(), np.abs(gm - 6 * F**4).max()))


def test_fifth_order_field_has_no_traces(state):
    X, Z = _mesh(state)
    xt = P.x_tilde(X, Z, 2)
    fm, gm = B.trace_derivatives(replace(state, w=xt**5 * np.exp(-xt**2)))
    assert np.max(np.abs(fm)) < 1e-8 and np.max(np.abs(gm)) < 1e-5


def test_coarse_grid_rejected():
    st = B.init_from_profiles(scheme=B.Scheme2D(nx=257, nz=33))
    with pytest.raises(GridTooCoarse):
        B.trace_derivatives(st)


def test_cubic_perturbation_rejected():
    with pytest.raises(AxisOrderViolation):
        B.init_from_profiles(scheme=B.Scheme2D(nz=65),
                             perturbation=lambda X, Z: 1e-8 * X**3 * np.exp(-X**2 - Z**2))


def test_even_in_x_perturbation_rejected():
    with pytest.raises(AxisOrderViolation):
        B.init_from_profiles(scheme=B.Scheme2D(nz=65),
                             perturbation=lambda X, Z: 1e-8 * X**6 * np.exp(-X**2 - Z**2))


def test_phi40_box_perturbation_norm(state):
    delta, q = 1e-4, 6
    X, Z = state.X, state.Z
    Y = state.frame.y_of_z(state.s, Z)
    n = X.size // 2
    # box edges on nodes, well outside the axis fit window
    ia, ib = n + 200, n + 230
    ja, jb = Z.size // 2 - 8, Z.size // 2 + 8
    Xa, Xb, Ya, Yb = X[ia], X[ib], Y[ja], Y[jb]
    inside = lambda x, z: (np.abs(x) >= Xa) & (np.abs(x) <= Xb) & (np.abs(z) <= Z[jb])
    pert = lambda x, z: delta * np.sign(x) * P.phi_jl_2d(2, 4, 0, x, z) * inside(x, z)
    st = B.init_from_profiles(scheme=state.scheme, perturbation=pert)
    eps = st.w - st.Q()
    W = B.weight_field(2, X, Z)
    r = S.weighted_norm(eps, X, Y, W, q=q, box=(Xa, Xb, Ya, Yb))
    expect = delta * S.box_measure(Xa, Xb, Ya, Yb) ** (1.0 / (2 * q))
    assert r.value == pytest.approx(expect, rel=1e-3)


def test_oversized_perturbation_rejected(state):
    pert = lambda x, z: 1e3 * np.sign(x) * P.phi_jl_2d(2, 4, 0, x, z) * (np.abs(x) > 1.0) * (np.abs(x) < 2.0)
    with pytest.raises(ValueError):
        B.init_from_profiles(scheme=state.scheme, perturbation=pert)


def test_oddness_preserved(state):
    X, Z = _mesh(state)
    st = replace(state, w=state.w + 1e-5 * X**5 * np.exp(-X**2) * np.exp(-Z**2))
    st = B.step_2d(B.step_2d(st))
    assert np.array_equal(st.w, -st.w[::-1, :])
    assert np.array_equal(st.w, st.w[:, ::-1])


def test_linear_advection_bump(state):
    sch = replace(state.scheme, nonlinear=False, source=False, z_drift=False, diffusion=False)
    X, Z = _mesh(state)
    bump = lambda x: np.exp(-((x - 1.0) / 0.3) ** 2)
    w0 = (bump(X) - bump(-X)) * np.ones_like(Z)
    st = B.step_2d(replace(state, w=w0, scheme=sch))
    Xd = X * math.exp(-1.5 * sch.ds)
    exact = (bump(Xd) - bump(-Xd)) * np.ones_like(Z)
    assert np.max(np.abs(st.w - exact)) < 1e-3
    # the peak moved to X = e^(1.5 ds)
    col = st.w[:, Z.size // 2]
    i = int(np.argmax(col))
    assert abs(state.X[i] - math.exp(1.5 * sch.ds)) <= np.diff(state.X)[i]


def test_theta_near_fixed_point_without_diffusion():
    # the change of Theta under one step is the Z-interpolation error,
    # second order in h_Z
    errs = []
    for nz in (65, 129, 257):
        st = B.init_from_profiles(scheme=B.Scheme2D(nz=nz, diffusion=False))
        X, Z = _mesh(st)
        th = P.theta_2d(st.frame, X, Z)
        errs.append(float(np.abs(B.step_2d(replace(st, w=th.copy())).w - th).max()))
    assert errs[-1] < 2e-5
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_theta_fixed_point_without_z_dependence_in_step(state):
    # without the Z drift, one step moves Theta only by X interpolation error
    # plus the drift term it no longer balances, which is what this measures
    sch = replace(state.scheme, diffusion=False, z_drift=False)
    X, Z = _mesh(state)
    th = P.theta_2d(state.frame, X, Z)
    d = B.step_2d(replace(state, w=th.copy(), scheme=sch)).w - th
    ZdTh = (P.theta_2d(state.frame, X, Z + 1e-5) - P.theta_2d(state.frame, X, Z - 1e-5)) / 2e-5
    pred = sch.ds * Z * ZdTh / 4.0
    win = np.abs(Z[0]) <= 2.0
    assert np.max(np.abs(d - pred)[:, win]) < 0.05 * np.max(np.abs(pred)[:, win])


def test_diagnostics_row_at_start(state):
    row = B.diagnostics(state)
    names = B.REPORT_COLUMNS
    vals = dict(zip(names, row))
    assert vals["s"] == state.s
    assert np.all(np.isfinite(row))
    assert vals["axis_defect"] <= 10.0 * B.truncation_floor(state)
