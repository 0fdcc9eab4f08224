"""Discretely self-similar shock profiles.

A seed V on [X_0, X_1] (negative side) is pushed forward by the map
phi(X, V) = (lam^-alpha X + (lam^-alpha - lam^(1-alpha)) V,  lam^(1-alpha) V),
which fills [X_1, X_2), [X_2, X_3), ... accumulating at 0.  The result W
satisfies W(X) = lam^(1-alpha) W(lam^alpha X + (lam^alpha - lam^(alpha-1)) W(X))
and is extended to X > 0 by oddness.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InversionFailure, MaxIters, NoBracket, SeedInvalid
from .numerics import Tolerance, invert_monotone

SAMPLES_PER_SEGMENT = 256
DEGENERATE_REL = 1e-14


@dataclass(frozen=True)
class DssParams:
    lam: float = 2.0
    alpha: float = 1.5

    def __post_init__(self):
        if not (self.lam > 1.0 and self.alpha > 1.0):
            raise ValueError("DSS needs lambda > 1 and alpha > 1")

    @property
    def i_equiv(self) -> float:
        return 1.0 / (2.0 * (self.alpha - 1.0))

    @property
    def shrink(self) -> float:
        """lam^-alpha, the X-contraction at fixed V."""
        return self.lam ** (-self.alpha)

    @property
    def value_scale(self) -> float:
        """lam^(1-alpha), the V-contraction."""
        return self.lam ** (1.0 - self.alpha)

    def push(self, X, V):
        return self.shrink * X + (self.shrink - self.value_scale) * V, self.value_scale * V

    def slope_map(self, a):
        """Derivative iteration a -> lam a / (1 - (lam - 1) a); fixed points -1 and 0."""
        return self.lam * a / (1.0 - (self.lam - 1.0) * a)


@dataclass
class DssSeed:
    """Seed on [X0, X1] given either as callables or as Hermite samples."""

    X0: float
    X1: float
    V: Callable
    dV: Callable

    @classmethod
    def from_samples(cls, X, W, W_X):
        X = np.asarray(X, dtype=float)
        spline = CubicHermiteSpline(X, np.asarray(W, float), np.asarray(W_X, float))
        return cls(float(X[0]), float(X[-1]), spline, spline.derivative())

    @classmethod
    def from_function(cls, X0, V, dV, params: DssParams):
        """Seed on [X0, phi(X0)] from a function defined on that interval."""
        X1, _ = params.push(X0, float(V(X0)))
        return cls(float(X0), float(X1), V, dV)

    def sample_nodes(self, n: int = SAMPLES_PER_SEGMENT) -> np.ndarray:
        # geometric refinement toward X1
        q = (np.geomspace(1.0, 1e-3, n) - 1e-3) / (1.0 - 1e-3)
        return self.X1 - (self.X1 - self.X0) * q


@dataclass
class SeedReport:
    conditions: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.conditions.values())

    def rows(self):
        return [(name, passed, defect) for name, (passed, defect) in self.conditions.items()]


def dss_seed_check(seed: DssSeed, params: DssParams, tol: float = 1e-10,
                   n_samples: int = SAMPLES_PER_SEGMENT) -> SeedReport:
    """Breakpoint formula, open range conditions and both endpoint matchings."""
    rep = SeedReport()
    V0 = float(seed.V(seed.X0))
    dV0 = float(seed.dV(seed.X0))
    V1 = float(seed.V(seed.X1))
    dV1 = float(seed.dV(seed.X1))
    X1_pred, V1_pred = params.push(seed.X0, V0)
    d = abs(X1_pred - seed.X1)
    rep.conditions["breakpoint"] = (d <= tol * max(1.0, abs(seed.X1)), d)

    Xs = seed.sample_nodes(n_samples)
    Vs = np.asarray(seed.V(Xs), dtype=float)
    dVs = np.asarray(seed.dV(Xs), dtype=float)
    # margins: positive means inside the open range
    m_lo = float(np.min(Vs))
    m_hi = float(np.min(-Xs - Vs))
    rep.conditions["range_V"] = (m_lo > 0 and m_hi > 0, min(m_lo, m_hi))
    s_lo = float(np.min(dVs + 1.0))
    s_hi = float(np.min(-dVs))
    rep.conditions["range_V_X"] = (s_lo > 0 and s_hi > 0, min(s_lo, s_hi))

    d = abs(V1 - V1_pred)
    rep.conditions["match_value"] = (d <= tol * max(1.0, abs(V1)), d)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = params.slope_map(dV0)
    d = abs(dV1 - target)
    rep.conditions["match_slope"] = (bool(np.isfinite(d)) and d <= tol * max(1.0, abs(dV1)), d)
    return rep


@dataclass
class DssState:
    """Breakpoints X_0 < X_1 < ... < X_n < 0 and per-segment tables.

    Segment k covers [X_k, X_{k+1}); the breakpoint array also holds the
    right end of the last segment.

    ``defect`` stores -W - X, which contracts exactly by lam^-alpha per
    segment, so it is tracked directly rather than formed by cancellation.
    """

    params: DssParams
    seed: DssSeed
    breakpoints: np.ndarray
    X: list
    W: list
    W_X: list
    defect: list

    @property
    def n_segments(self):
        return len(self.X)

    def segment_index(self, X):
        """Index k with X_k <= X < X_{k+1} for X on the negative side."""
        k = np.searchsorted(self.breakpoints, np.asarray(X, float), side="right") - 1
        return np.clip(k, 0, self.n_segments - 1)

    def _pushed(self, y, k):
        x = y
        v = np.asarray(self.seed.V(y), dtype=float)
        for _ in range(int(k)):
            x, v = self.params.push(x, v)
        return x, v

    def evaluate(self, X, with_derivative: bool = False, tol: Tolerance = Tolerance(abs=1e-15, rel=1e-14)):
        """W at arbitrary X in [X_0, X_n] (either sign), by inverting the
        iterated map back to the seed interval."""
        X = np.asarray(X, dtype=float)
        ax = -np.abs(X)
        if np.any(ax < self.breakpoints[0] - 1e-12 * abs(self.breakpoints[0])) or np.any(
            (ax > self.breakpoints[-1]) & (ax != 0.0)
        ):
            raise InversionFailure("point outside the constructed range")
        out = np.zeros_like(ax)
        dout = np.zeros_like(ax)
        ks = self.segment_index(ax)
        for k in np.unique(ks):
            sel = (ks == k) & (ax != 0.0)
            if not np.any(sel):
                continue
            try:
                y = invert_monotone(
                    lambda q, k=k: self._pushed(q, k)[0],
                    (np.full(sel.sum(), self.seed.X0), np.full(sel.sum(), self.seed.X1)),
                    ax[sel],
                    tol,
                )
            except (NoBracket, MaxIters) as exc:
                raise InversionFailure(str(exc)) from exc
            out[sel] = self.params.value_scale**k * np.asarray(self.seed.V(y), dtype=float)
            if with_derivative:
                a = np.asarray(self.seed.dV(y), dtype=float)
                for _ in range(int(k)):
                    a = self.params.slope_map(a)
                dout[sel] = a
        out = np.where(X > 0, -out, out)
        if with_derivative:
            return out, dout
        return out

    def functional_equation_defect(self, X):
        """|W(X) - lam^(1-alpha) W(lam^alpha X + (lam^alpha - lam^(alpha-1)) W(X))|."""
        p = self.params
        W = self.evaluate(X)
        arg = p.lam**p.alpha * X + (p.lam**p.alpha - p.lam ** (p.alpha - 1.0)) * W
        return np.abs(W - p.value_scale * self.evaluate(arg))

    def table(self):
        """Rows (segment, X, W, W_X) over all tabulated samples."""
        rows = []
        for k in range(self.n_segments):
            for x, w, d in zip(self.X[k], self.W[k], self.W_X[k]):
                rows.append((k, x, w, d))
        return rows


def dss_extend(seed: DssSeed, params: DssParams, n_steps: int,
               check_tol: float = 1e-10, n_samples: int = SAMPLES_PER_SEGMENT) -> DssState:
    """Seed segment plus n_steps pushed-forward segments."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    rep = dss_seed_check(seed, params, tol=check_tol, n_samples=n_samples)
    if not rep.ok:
        failed = [name for name, (ok, _) in rep.conditions.items() if not ok]
        raise SeedInvalid("seed fails: " + ", ".join(failed))
    X = seed.sample_nodes(n_samples)
    W = np.asarray(seed.V(X), dtype=float)
    WX = np.asarray(seed.dV(X), dtype=float)
    D = -W - X
    Xs, Ws, WXs, Ds = [X], [W], [WX], [D]
    bps = [seed.X0, seed.X1]
    for _ in range(n_steps):
        X, W = params.push(X, W)
        WX = params.slope_map(WX)
        D = params.shrink * D
        Xs.append(X)
        Ws.append(W)
        WXs.append(WX)
        Ds.append(D)
        bps.append(float(X[-1]))
    # the last sample of each segment is the next breakpoint; keep segments half-open
    segs = len(Xs)
    for k in range(segs - 1):
        Xs[k], Ws[k], WXs[k], Ds[k] = Xs[k][:-1], Ws[k][:-1], WXs[k][:-1], Ds[k][:-1]
    return DssState(params, seed, np.array(bps), Xs, Ws, WXs, Ds)


@dataclass
class HolderReport:
    ratio_min: float
    ratio_max: float
    degenerate: bool
    per_segment: list

    @property
    def spread(self) -> float:
        if self.ratio_min <= 0:
            return float("inf")
        return self.ratio_max / self.ratio_min - 1.0


def dss_holder_ratio(state: DssState, last: int = 5) -> HolderReport:
    """Extrema of (-W - X)/|X|^(1+2i) over the last ``last`` segments."""
    if state.n_segments < last:
        raise ValueError(f"need at least {last} segments")
    p = 1.0 + 2.0 * state.params.i_equiv
    rows = []
    lo, hi = np.inf, -np.inf
    degenerate = False
    for k in range(state.n_segments - last, state.n_segments):
        X = state.X[k]
        D = state.defect[k]
        scale = np.abs(X) ** p
        bad = np.abs(D) < DEGENERATE_REL * scale
        if np.any(bad):
            degenerate = True
        r = D[~bad] / scale[~bad]
        if r.size:
            rows.append((k, float(r.min()), float(r.max())))
            lo, hi = min(lo, r.min()), max(hi, r.max())
        else:
            rows.append((k, 0.0, 0.0))
    if not np.isfinite(lo):
        lo = hi = 0.0
    return HolderReport(float(lo), float(hi), degenerate, rows)


def psi1_seed(params: DssParams, X0: float = -8.0) -> DssSeed:
    from .profiles import psi

    return DssSeed.from_function(X0, lambda x: psi(1, x), lambda x: psi(1, x, 1), params)


def perturbed_seed(params: DssParams, X0: float = -8.0, amplitude: float = 0.05) -> DssSeed:
    """Psi_1 on [X0, X1] plus a bump vanishing to first order at both ends,
    so both endpoint matchings survive while the seed is no longer a
    restriction of Psi_1."""
    from .profiles import psi

    base = psi1_seed(params, X0)
    a, b = base.X0, base.X1
    L = b - a

    def bump(x):
        t = (np.asarray(x, float) - a) / L
        return amplitude * 16.0 * t * t * (1 - t) ** 2

    def dbump(x):
        t = (np.asarray(x, float) - a) / L
        return amplitude * 16.0 * (2 * t * (1 - t) ** 2 - 2 * t * t * (1 - t)) / L

    return DssSeed(a, b, lambda x: psi(1, x) + bump(x), lambda x: psi(1, x, 1) + dbump(x))
