import math

import numpy as np
import pytest

from tvburgers import dss as D
from tvburgers import profiles as P
from tvburgers.errors import SeedInvalid


@pytest.fixture(scope="module")
def params():
    return D.DssParams(2.0, 1.5)


@pytest.fixture(scope="module")
def psi_state(params):
    return D.dss_extend(D.psi1_seed(params), params, 20)


@pytest.fixture(scope="module")
def pert_state(params):
    return D.dss_extend(D.perturbed_seed(params), params, 30)


def test_params_invariants():
    p = D.DssParams(3.0, 1.25)
    assert p.i_equiv == 2.0
    with pytest.raises(ValueError):
        D.DssParams(1.0, 1.5)
    with pytest.raises(ValueError):
        D.DssParams(2.0, 1.0)


def test_slope_map_fixed_points(params):
    assert params.slope_map(-1.0) == -1.0
    assert params.slope_map(0.0) == 0.0


def test_psi1_seed_passes(params):
    rep = D.dss_seed_check(D.psi1_seed(params), params)
    assert rep.ok
    assert rep.conditions["match_value"][1] < 1e-10


def test_seed_on_range_boundary_fails(params):
    X0 = -8.0
    seed = D.DssSeed(X0, params.push(X0, 8.0)[0], lambda x: -np.asarray(x, float), lambda x: -np.ones_like(np.asarray(x, float)))
    rep = D.dss_seed_check(seed, params)
    assert not rep.conditions["range_V"][0]


def test_zero_seed_fails(params):
    seed = D.DssSeed(-8.0, -8.0 * params.shrink, lambda x: np.zeros_like(np.asarray(x, float)),
                     lambda x: np.zeros_like(np.asarray(x, float)))
    rep = D.dss_seed_check(seed, params)
    assert not rep.conditions["range_V"][0]
    with pytest.raises(SeedInvalid):
        D.dss_extend(seed, params, 3)


def test_psi1_reproduced(psi_state):
    err = max(float(np.max(np.abs(W - P.psi(1, X)))) for X, W in zip(psi_state.X, psi_state.W))
    assert err < 1e-9


def test_breakpoint_recursion(psi_state, params):
    bp = psi_state.breakpoints
    W = psi_state.evaluate(bp[:-1])
    pred = params.shrink * bp[:-1] + (params.shrink - params.value_scale) * W
    assert np.max(np.abs(pred - bp[1:])) < 1e-12


def test_range_conditions(pert_state):
    for X, W, WX in zip(pert_state.X, pert_state.W, pert_state.W_X):
        assert np.all(W > 0) and np.all(W < -X)
        assert np.all(WX > -1) and np.all(WX < 0)


def test_functional_equation(pert_state):
    # the relation looks one segment back, so the seed segment is skipped
    X = np.concatenate([x[::16] for x in pert_state.X[1:]])
    assert np.max(pert_state.functional_equation_defect(X)) < 1e-10


def test_breakpoint_asymptotics(params):
    st = D.dss_extend(D.perturbed_seed(params), params, 30)
    W0 = float(st.seed.V(st.seed.X0))
    k = 30
    ratio = st.breakpoints[k] / (-params.lam ** (k * (1 - params.alpha)) * W0)
    assert ratio == pytest.approx(1.0, abs=1e-3)


def test_slope_tends_to_minus_one(pert_state):
    assert abs(pert_state.W_X[-1][-1] + 1.0) < 1e-3


def test_derivative_iteration(pert_state, params):
    for k in range(len(pert_state.W_X) - 1):
        a = pert_state.W_X[k]
        b = pert_state.W_X[k + 1]
        # the map is increasing, so sup and inf are carried over
        assert params.slope_map(a.max()) == pytest.approx(b.max(), abs=1e-8)
        assert params.slope_map(a.min()) == pytest.approx(b.min(), abs=1e-8)


def test_monotone_extension(pert_state):
    for X in pert_state.X:
        assert np.all(np.diff(X) > 0)


def test_holder_psi1_constant(params):
    st = D.dss_extend(D.psi1_seed(params), params, 30)
    h = D.dss_holder_ratio(st)
    assert h.spread < 1e-6
    assert h.ratio_min == pytest.approx(1.0, abs=1e-6)


def test_holder_perturbed_oscillates(pert_state):
    h = D.dss_holder_ratio(pert_state)
    assert 1e-3 < h.spread < math.inf
    assert h.ratio_min > 0


def test_holder_degenerate_flag(params):
    st = D.dss_extend(D.psi1_seed(params), params, 6)
    st.defect[-1] = np.zeros_like(st.defect[-1])
    h = D.dss_holder_ratio(st)
    assert h.degenerate


def test_odd_extension(psi_state):
    X = np.array([-0.5, -0.01])
    assert np.allclose(psi_state.evaluate(-X), -psi_state.evaluate(X), atol=0)


def test_hermite_seed_from_samples(params):
    base = D.psi1_seed(params)
    X = np.linspace(base.X0, base.X1, 400)
    seed = D.DssSeed.from_samples(X, P.psi(1, X), P.psi(1, X, 1))
    assert D.dss_seed_check(seed, params, tol=1e-8).ok
