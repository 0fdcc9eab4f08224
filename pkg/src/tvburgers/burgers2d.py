"""Renormalized 2-D Burgers with transverse viscosity in (X, Z).

    w_s - w/2 + (3/2) X w_X + (1/2k) Z w_Z + w w_X - e^{-(k-1)s/k} w_ZZ = 0

w is odd in X and even in Z.  A step is Strang split:

    Z drift (ds/2), Z diffusion (ds/2), X transport (ds), Z diffusion (ds/2), Z drift (ds/2)

The X transport is the 1-D operator w_s - w/2 + (3/2)X w_X + w w_X = 0,
whose characteristics are known in closed form: w grows like e^{s/2}
along them and X(ds) = e^{3ds/2} X_d + (e^{3ds/2} - e^{ds/2}) w(X_d).
Departure points are found by fixed-point iteration and values by
monotone cubic interpolation in the stretched-grid index.  The axis
traces (f, g) = (-w_X, w_XXX)(0, Z) are also evolved separately by the
1-D solver on the same Z nodes (the companion).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import parabolic1d as P1
from . import profiles as P
from .errors import AxisOrderViolation, CharacteristicEscape, GridTooCoarse, StabilityViolated
from .numerics import Grid1D, TridiagonalSystem, grid_derivative, monotone_cubic, monotone_slopes, solve_tridiagonal
from .report import csv_text
from .spectral import weighted_norm

Z_MAX = 4.0
FIXED_POINT_ITERS = 4
TRACE_WINDOW = 0.12
TRACE_TERMS = 4
TRACE_MIN_NODES = 6


@dataclass(frozen=True)
class Scheme2D:
    ds: float = 0.01
    nx: int = 513
    nz: int = 257
    x_core: float = 0.25
    z_max: float = Z_MAX
    diffusion: bool = True
    nonlinear: bool = True
    source: bool = True
    z_drift: bool = True
    backend: str = "lapack"

    def __post_init__(self):
        if self.nx % 2 == 0 or self.nz % 2 == 0:
            raise ValueError("nx and nz must be odd so the axis and Z = 0 are nodes")


def x_extent(k: int, z_max: float = Z_MAX, i: int = 1) -> float:
    """L_X with |X~| <= 20 on the whole Z range."""
    return 20.0 * (1.0 + z_max ** (2 * k)) ** P.alpha(i)


def symmetric_sinh_grid(L: float, n: int, core: float) -> Grid1D:
    """Sinh grid on [-L, L] with nodes mirrored exactly and 0 a node."""
    g = Grid1D(-L, L, n, kind="sinh", core=core)
    half = g.nodes[n // 2 + 1:]
    half = 0.5 * (half - g.nodes[: n // 2][::-1])
    nodes = np.concatenate([-half[::-1], [0.0], half])
    g.nodes = nodes
    return g


def symmetrize(w):
    """Project onto odd-in-X (axis 0), even-in-Z (axis 1) fields."""
    # each stage is a sum with its own mirror image, so the symmetry is
    # exact in floating point rather than up to rounding
    w = 0.5 * (w + w[:, ::-1])
    w = 0.5 * (w - w[::-1, :])
    w[w.shape[0] // 2, :] = 0.0
    return w


@dataclass
class Renorm2DState:
    s: float
    w: np.ndarray
    gx: Grid1D
    gz: Grid1D
    frame: P.SelfSimilarFrame
    companion: P1.ParabolicState
    scheme: Scheme2D = Scheme2D()
    cutoff: P.CutoffSpec = P.CutoffSpec()

    @property
    def X(self):
        return self.gx.nodes

    @property
    def Z(self):
        return self.gz.nodes

    def companion_full(self):
        """Companion (f, g) on the full symmetric Z grid."""
        f, g = self.companion.f, self.companion.g
        return np.concatenate([f[:0:-1], f]), np.concatenate([g[:0:-1], g])

    def Q_face(self):
        """Q on the Z = z_max face (the Dirichlet data of the diffusion solve)."""
        f, g = self.companion.f[-1], self.companion.g[-1]
        return P.glued_profile_Q(f, g, self.X, self.Z[-1], self.s, self.frame, self.cutoff)

    def Q(self, f=None, g=None, order_X: int = 0):
        if f is None:
            f, g = self.companion_full()
        return P.glued_profile_Q(f[None, :], g[None, :], self.X[:, None], self.Z[None, :], self.s,
                                 self.frame, self.cutoff, order_X)


def _companion_grid(gz: Grid1D) -> Grid1D:
    nodes = gz.nodes[gz.n // 2:]
    return Grid1D(0.0, nodes[-1], nodes.size, kind="uniform")


# --------------------------------------------------------------------------
# sub-steps


def _x_transport(state: Renorm2DState, ds: float):
    sch = state.scheme
    X = state.X
    gx = state.gx
    W = state.w.T  # (nz, nx): interpolate along the last axis
    slopes = monotone_slopes(W)
    E = math.exp(1.5 * ds)
    c = (E - math.exp(0.5 * ds)) if sch.nonlinear else 0.0
    t_arr = np.arange(gx.n, dtype=float)
    Xd = np.broadcast_to(X / E, W.shape).copy()
    wd = W
    if c != 0.0:
        for _ in range(FIXED_POINT_ITERS):
            Xd = (X[None, :] - c * wd) / E
            if np.any(Xd < X[0]) or np.any(Xd > X[-1]):
                raise CharacteristicEscape("departure point outside the X range", state.s)
            wd = monotone_cubic(W, gx.index_coordinate(Xd), slopes)
    td = gx.index_coordinate(Xd)
    if np.max(np.abs(td - t_arr[None, :])) > 2.0:
        raise StabilityViolated("X characteristics travel more than two cells; reduce ds", state.s)
    wd = monotone_cubic(W, td, slopes)
    if sch.source:
        wd = wd * math.exp(0.5 * ds)
    return wd.T


def _z_drift(state: Renorm2DState, w, ds: float):
    Zd = state.Z * math.exp(-ds / (2.0 * state.frame.k))
    return monotone_cubic(w, state.gz.index_coordinate(Zd))


def _z_diffusion(state: Renorm2DState, w, s_a: float, s_b: float, boundary):
    """Crank-Nicolson in Z for every X row, Dirichlet rows at both Z faces."""
    k = state.frame.k
    D = math.exp(-(k - 1) * 0.5 * (s_a + s_b) / k)
    h = state.Z[1] - state.Z[0]
    theta = 0.5 * (s_b - s_a) * D / (h * h)
    n = state.gz.n
    rhs = w.T.copy()  # (nz, nx)
    rhs[1:-1] = w.T[1:-1] + theta * (w.T[2:] - 2.0 * w.T[1:-1] + w.T[:-2])
    rhs[0] = boundary
    rhs[-1] = boundary
    lo = np.full(n - 1, -theta)
    up = np.full(n - 1, -theta)
    di = np.full(n, 1.0 + 2.0 * theta)
    di[0] = di[-1] = 1.0
    up[0] = 0.0
    lo[-1] = 0.0
    out = solve_tridiagonal(TridiagonalSystem(lo, di, up, rhs), backend=state.scheme.backend)
    return out.T


def step_2d(state: Renorm2DState) -> Renorm2DState:
    sch = state.scheme
    ds = sch.ds
    s0, sm, s1 = state.s, state.s + 0.5 * ds, state.s + ds
    comp_next = P1.step(state.companion)
    w = state.w
    if sch.z_drift:
        w = _z_drift(state, w, 0.5 * ds)
    if sch.diffusion:
        mid = replace(state, s=sm, companion=_interp_companion(state.companion, comp_next))
        w = _z_diffusion(state, w, s0, sm, mid.Q_face())
    w = _x_transport(replace(state, w=w), ds)
    after = replace(state, s=s1, companion=comp_next)
    if sch.diffusion:
        w = _z_diffusion(state, w, sm, s1, after.Q_face())
    if sch.z_drift:
        w = _z_drift(state, w, 0.5 * ds)
    after.w = symmetrize(w)
    return after


def _interp_companion(a: P1.ParabolicState, b: P1.ParabolicState):
    return a.copy_with(s=0.5 * (a.s + b.s), f=0.5 * (a.f + b.f), g=0.5 * (a.g + b.g))


# --------------------------------------------------------------------------
# initial data and traces


def check_axis_order(pert, X, Z, order: int = 4):
    """Reject data that does not vanish to the given order on the axis."""
    n = X.size // 2
    X1, X2 = X[n + 1], X[n + 2]
    p1 = np.abs(pert[n + 1])
    p2 = np.abs(pert[n + 2])
    live = (p1 > 1e-300) & (p2 > 1e-300)
    if not np.any(live):
        return float("inf")
    m = np.log(p2[live] / p1[live]) / math.log(X2 / X1)
    mmin = float(np.min(m))
    if mmin < order + 0.5:
        raise AxisOrderViolation(f"perturbation vanishes only like |X|^{mmin:.2f} on the axis")
    return mmin


def weight_field(k: int, X, Z):
    return P.phi_jl_2d(k, 4, 0, X[:, None], Z[None, :])


def eps_norm(state: Renorm2DState, eps, q: int = 6):
    """Weighted 2q-norm of an odd-in-X field.

    Points inside the axis fit window |X~| <= TRACE_WINDOW are left out:
    there eps is the fit's least-squares residual, not the solution's
    remainder, and dX/|X| amplifies it.
    """
    X, Z = state.X, state.Z
    Y = state.frame.y_of_z(state.s, Z)
    keep = np.abs(P.x_tilde(X[:, None], Z[None, :], state.frame.k)) > TRACE_WINDOW
    masked = np.where(keep, eps, 0.0)
    return weighted_norm(masked, X, Y, weight_field(state.frame.k, X, Z), q=q)


def init_from_profiles(k: int = 2, s0: float = 10.0, perturbation: Optional[Callable] = None,
                       scheme: Scheme2D = Scheme2D(), g_tiny: float = 1e-3, companion_offset: float = 0.0,
                       norm_fraction: float = 0.5) -> Renorm2DState:
    """w(s0) = Q(s0) + perturbation with (f, g) = (F[a](s0), 6 F_k^4 (1 + tiny))."""
    frame = P.SelfSimilarFrame(i=1, k=k)
    gx = symmetric_sinh_grid(x_extent(k, scheme.z_max), scheme.nx, scheme.x_core)
    gz = Grid1D.uniform(-scheme.z_max, scheme.z_max, scheme.nz)
    ch = _companion_grid(gz)
    beta = frame.z_rate
    Zh = ch.nodes
    f0 = P.approx_profile_F(k, 1.0, s0, np.exp(beta * s0) * Zh) + companion_offset * P.phi_z(k, 1.0, 0, Zh)
    F = P.f_k(k, 1.0, Zh)
    g0 = 6.0 * F**4 * (1.0 + g_tiny * Zh * Zh * np.exp(-Zh * Zh))
    comp = P1.ParabolicState(s0, f0, g0, ch, frame, P1.Scheme(ds=scheme.ds), "Z", "flat")
    st = Renorm2DState(s0, np.zeros((gx.n, gz.n)), gx, gz, frame, comp, scheme)
    w = st.Q()
    if perturbation is not None:
        pert = np.asarray(perturbation(st.X[:, None], st.Z[None, :]), float)
        pert = np.broadcast_to(pert, w.shape)
        if np.max(np.abs(pert + pert[::-1, :])) > 1e-14 * max(1.0, np.max(np.abs(pert))) or \
                np.max(np.abs(pert - pert[:, ::-1])) > 1e-14 * max(1.0, np.max(np.abs(pert))):
            raise AxisOrderViolation("perturbation must be odd in X and even in Z")
        check_axis_order(pert, st.X, st.Z)
        nrm = eps_norm(st, pert).value
        if nrm > norm_fraction * math.exp(-0.5 * s0):
            raise ValueError(f"perturbation norm {nrm:.3g} exceeds {norm_fraction} e^(-s0/2)")
        w = w + pert
    st.w = symmetrize(w)
    return st


def _axis_fit(state: Renorm2DState, field):
    """Odd least-squares fit of each Z column near the axis.

    The nodes are those with 0 < X~ <= TRACE_WINDOW, i.e. a window that
    widens with Z like the core of the profile.  A fixed set of nodes
    next to the axis sees the cubic term only at relative size X~^2,
    which at large Z is below rounding; the scaled window keeps it
    resolved.  Returns coefficients of u^(2j+1), u = X / scale, shape
    (TRACE_TERMS, nz), and the per-column scale.
    """
    X, Z = state.X, state.Z
    n = X.size // 2
    Xp = X[n + 1:]
    scale = (1.0 + Z ** (2 * state.frame.k)) ** P.alpha(1)
    coef = np.empty((TRACE_TERMS, Z.size))
    for j in range(Z.size):
        u = Xp / scale[j]
        m = int(np.count_nonzero(u <= TRACE_WINDOW))
        if m < TRACE_MIN_NODES:
            raise GridTooCoarse(f"only {m} nodes inside the axis fit window at Z = {Z[j]:.3g}")
        V = np.stack([u[:m] ** (2 * t + 1) for t in range(TRACE_TERMS)], axis=1)
        coef[:, j] = np.linalg.lstsq(V, field[n + 1: n + 1 + m, j], rcond=None)[0]
    return coef, scale


def trace_derivatives(state: Renorm2DState):
    """(-w_X, w_XXX) on the axis from the scaled odd fit."""
    coef, scale = _axis_fit(state, state.w)
    return -coef[0] / scale, 6.0 * coef[1] / scale**3


def axis_defects(state: Renorm2DState, eps):
    """max over Z of |d^j eps/dX^j (0, Z)|, j = 0..4, from the same fit."""
    n = state.X.size // 2
    coef, scale = _axis_fit(state, eps)
    d = [np.abs(eps[n]).max(), np.abs(coef[0] / scale).max(), 0.0,
         6.0 * np.abs(coef[1] / scale**3).max(), 0.0]
    return [float(x) for x in d]


def truncation_floor(state: Renorm2DState):
    """Error of the axis fit on Theta, whose traces are known exactly.

    Same nodes and windows as the run, so it is the a-priori stencil
    floor for the first and third derivative (the larger is returned).
    """
    k = state.frame.k
    X, Z = state.X, state.Z
    th = P.theta_2d(P.SelfSimilarFrame(i=1, k=k), X[:, None], Z[None, :])
    coef, scale = _axis_fit(state, th)
    F = P.f_k(k, 1.0, Z)
    e1 = np.abs(-coef[0] / scale - F).max()
    e3 = np.abs(6.0 * coef[1] / scale**3 - 6.0 * F**4).max()
    return float(max(e1, e3))


# --------------------------------------------------------------------------
# diagnostics and runs


REPORT_COLUMNS = ("s", "sup_w_theta", "sup_wx_theta", "eps_norm", "axis_defect", "q_theta_over_x",
                  "trace_f_vs_companion", "trace_g_vs_companion")


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    columns: tuple = REPORT_COLUMNS

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def log_slope(self, name, s_lo, s_hi):
        s = self.column("s")
        v = self.column(name)
        sel = (s >= s_lo - 1e-9) & (s <= s_hi + 1e-9) & (v > 0)
        if np.count_nonzero(sel) < 2:
            return float("nan")
        return float(np.polyfit(s[sel], np.log(v[sel]), 1)[0])

    def to_csv(self):
        return csv_text(self.columns, self.rows, {"report": "burgers2d", **self.meta})


def diagnostics(state: Renorm2DState, window=(2.0, 2.0)):
    k = state.frame.k
    X, Z = state.X, state.Z
    Xg, Zg = X[:, None], Z[None, :]
    win = (np.abs(P.x_tilde(Xg, Zg, k)) <= window[0]) & (np.abs(Zg) <= window[1])
    th = P.theta_2d(state.frame, Xg, Zg)
    thx = P.theta_2d(state.frame, Xg, Zg, 1)
    wx = grid_derivative(state.w, state.gx, axis=0)
    d0 = float(np.max(np.abs(state.w - th)[win]))
    d1 = float(np.max(np.abs(wx - thx)[win]))
    fm, gm = trace_derivatives(state)
    eps = state.w - state.Q(fm, gm)
    try:
        en = eps_norm(state, eps).value
    except AxisOrderViolation:
        en = float("nan")
    defect = max(axis_defects(state, eps))
    Qc = state.Q()
    nz = win & (np.abs(Xg) > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        qt = float(np.max((np.abs(Qc - th) / np.abs(Xg))[nz]))
    fc, gc = state.companion_full()
    return [state.s, d0, d1, en, defect, qt, float(np.max(np.abs(fm - fc))), float(np.max(np.abs(gm - gc)))]


def shoot_companion(k, s0, s_end, scheme: Scheme2D, margin: float = 2.0):
    """Offset of F_k^2 in the companion's initial f that suppresses its growing mode."""
    gz = Grid1D.uniform(-scheme.z_max, scheme.z_max, scheme.nz)
    ch = _companion_grid(gz)
    frame = P.SelfSimilarFrame(i=1, k=k)
    Zh = ch.nodes
    base = P.approx_profile_F(k, 1.0, s0, np.exp(frame.z_rate * s0) * Zh)
    F = P.f_k(k, 1.0, Zh)
    g0 = 6.0 * F**4

    def make(d):
        return P1.ParabolicState(s0, base + d * P.phi_z(k, 1.0, 0, Zh), g0.copy(), ch, frame,
                                 P1.Scheme(ds=scheme.ds), "Z", "flat")

    return P1.shoot_constant(make, lambda s: 1.0, s_end + margin, bracket=(-1e-3, 1e-3))


def run_2d(k: int = 2, s0: float = 10.0, s_end: float = 14.0, perturbation=None, window=(2.0, 2.0),
           cadence: float = 0.5, scheme: Scheme2D = Scheme2D(), shoot: bool = True) -> ConvergenceReport:
    # one probe step first, so a step-guard violation surfaces as such
    # rather than as a failed shooting bracket
    step_2d(init_from_profiles(k, s0, perturbation, scheme))
    offset, iters = (shoot_companion(k, s0, s_end, scheme) if shoot else (0.0, 0))
    st = init_from_profiles(k, s0, perturbation, scheme, companion_offset=offset)
    rep = ConvergenceReport()
    rep.meta.update(k=k, s0=s0, s_end=s_end, ds=scheme.ds, nx=scheme.nx, nz=scheme.nz,
                    L_X=float(st.X[-1]), z_max=scheme.z_max, companion_offset=offset,
                    stencil_floor=truncation_floor(st))
    rep.rows.append(diagnostics(st, window))
    n = int(round((s_end - s0) / scheme.ds))
    every = max(int(round(cadence / scheme.ds)), 1)
    for j in range(1, n + 1):
        st = step_2d(st)
        if j % every == 0 or j == n:
            rep.rows.append(diagnostics(st, window))
    rep.state = st
    return rep
