"""Inviscid 1-D Burgers by exact characteristics.

U(t, x) = U0(y) where y + t U0(y) = x.  The shock forms at T = -1/min U0'
and near (x0 + cT, T) the solution approaches the self-similar profile
(T-t)^(1/2i) mu^-1 Psi_i(mu X).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (DegeneracyUndetermined, InversionFailure, MaxIters, NoBracket,
                     NoNegativeSlope, PastBlowup)
from .numerics import Tolerance, fd_derivative, invert_monotone
from .profiles import psi

VANISH_REL = 1e-9
MAX_DEGENERACY = 6


class InitialData:
    """U0 with derivatives: ``f(x, order)``.

    Built from a callable with analytic derivatives, or from values only
    (derivatives then come from Richardson-improved stencils).
    """

    def __init__(self, f: Callable, analytic: bool = True, h: float = 1e-2):
        self._f = f
        self.analytic = analytic
        self.h = h

    def __call__(self, x, order: int = 0):
        if self.analytic or order == 0:
            return self._f(x, order) if self.analytic else self._f(x, 0)
        return fd_derivative(lambda y: self._f(y, 0), x, order, self.h)

    def shifted(self, xs: float, cs: float) -> "InitialData":
        """U0(x - xs) + cs."""
        f = self._f
        return InitialData(lambda x, m=0: f(np.asarray(x) - xs, m) + (cs if m == 0 else 0.0),
                           self.analytic, self.h)


def minus_sin():
    return InitialData(lambda x, m=0: -np.sin(np.asarray(x, float) + m * math.pi / 2))


def psi1_data():
    return InitialData(lambda x, m=0: psi(1, x, m))


def polynomial_data(coeffs):
    """U0(x) = sum coeffs[n] x^n."""
    p = np.polynomial.Polynomial(coeffs)

    def f(x, m=0):
        return p.deriv(m)(np.asarray(x, float)) if m else p(np.asarray(x, float))

    return InitialData(f)


@dataclass(frozen=True)
class ShockReport:
    T: float
    x0: float
    c: float
    i: int
    mu: float
    nondegenerate: bool
    slope: float

    def as_rows(self):
        return [("T", self.T), ("x0", self.x0), ("c", self.c), ("i", self.i),
                ("mu", self.mu), ("nondegenerate", int(self.nondegenerate))]


def shock_detect(U0: InitialData, search_domain: Sequence[float], n_scan: int = 2001) -> ShockReport:
    """Locate the most negative slope and classify its degeneracy.

    A coarse scan picks the best cell, bounded golden-section search
    narrows it and a bracketed root solve on U0'' polishes x0.  The degeneracy index i is the first
    n with U0^(2n+1)(x0) > 0 after U0^(2)...U0^(2n) vanish within the
    band 1e-9 * max(1, |U0^(2n+1)|).
    """
    lo, hi = map(float, search_domain)
    xs = np.linspace(lo, hi, n_scan)
    d1 = np.asarray(U0(xs, 1), dtype=float)
    j = int(np.argmin(d1))
    if d1[j] >= 0:
        raise NoNegativeSlope("initial slope is nowhere negative: the solution is global")
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, n_scan - 1)]
    if b > a:
        res = minimize_scalar(lambda x: float(U0(x, 1)), bracket=None, bounds=(a, b),
                              method="bounded", options={"xatol": 1e-10})
        x0 = float(res.x)
    else:
        x0 = float(xs[j])
    # U0'' changes sign across the minimum whatever its multiplicity, so a
    # bracketed root solve pins x0 even where U0' is flat to many orders
    # (Newton on U0'' converges only linearly at a degenerate minimum)
    step = max(abs(b - a), 1e-8)
    for _ in range(60):
        l, r = max(x0 - step, lo), min(x0 + step, hi)
        dl, dr = float(U0(l, 2)), float(U0(r, 2))
        if dl == 0.0 or dr == 0.0 or dl * dr < 0:
            break
        step *= 2.0
    if dl == 0.0:
        x0 = l
    elif dr == 0.0:
        x0 = r
    elif dl * dr < 0:
        x0 = float(brentq(lambda x: float(U0(x, 2)), l, r, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                           maxiter=4000))
    slope = float(U0(x0, 1))
    if slope >= 0:
        raise NoNegativeSlope("minimum of the slope is not negative")
    T = -1.0 / slope
    c = float(U0(x0, 0))

    i = None
    for n in range(1, MAX_DEGENERACY + 1):
        top = float(U0(x0, 2 * n + 1))
        band = VANISH_REL * max(1.0, abs(top))
        evens = [abs(float(U0(x0, m))) for m in range(2, 2 * n + 1)]
        if any(e > band for e in evens):
            raise DegeneracyUndetermined("an even derivative does not vanish at the minimum")
        if top > band:
            i = n
            break
        if abs(top) > band:
            raise DegeneracyUndetermined("odd derivative has the wrong sign at the minimum")
    if i is None:
        raise DegeneracyUndetermined(f"all derivatives up to order {2 * MAX_DEGENERACY + 1} vanish")
    top = float(U0(x0, 2 * i + 1))
    mu = (top / (math.factorial(2 * i + 1) * (-slope) ** (2 * i + 2))) ** (1.0 / (2 * i))
    return ShockReport(T, x0, c, i, mu, i == 1, slope)


def _sup_abs(U0, x):
    return float(np.max(np.abs(U0(x, 0))))


def evolve_characteristics(U0: InitialData, t: float, x, T: float, domain: Sequence[float] = None,
                           tol: Tolerance = Tolerance(abs=1e-15, rel=1e-14)):
    """U(t, x) = U0(y*) with y* + t U0(y*) = x."""
    if t >= T:
        raise PastBlowup(f"t = {t} is not below the blow-up time {T}")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return U0(x, 0)
    if domain is None:
        domain = (float(np.min(x)) - 10.0, float(np.max(x)) + 10.0)
    M = _sup_abs(U0, np.linspace(domain[0], domain[1], 4001))
    pad = abs(t) * M * (1.0 + 1e-9) + 1e-12
    try:
        y = invert_monotone(lambda y: y + t * U0(y, 0), (x - pad, x + pad), x, tol,
                            fprime=lambda y: 1.0 + t * U0(y, 1))
    except (NoBracket, MaxIters) as exc:
        raise InversionFailure(str(exc)) from exc
    return U0(y, 0)


def evolve_slope(U0: InitialData, t: float, x, T: float, domain=None):
    """d_x U(t, x) = U0'(y) / (1 + t U0'(y))."""
    x = np.asarray(x, dtype=float)
    if t >= T:
        raise PastBlowup(f"t = {t} is not below the blow-up time {T}")
    if domain is None:
        domain = (float(np.min(x)) - 10.0, float(np.max(x)) + 10.0)
    M = _sup_abs(U0, np.linspace(domain[0], domain[1], 4001))
    pad = abs(t) * M * (1.0 + 1e-9) + 1e-12
    y = invert_monotone(lambda y: y + t * U0(y, 0), (x - pad, x + pad), x,
                        fprime=lambda y: 1.0 + t * U0(y, 1))
    d = U0(y, 1)
    return d / (1.0 + t * d)


def min_slope(U0: InitialData, t: float, report: ShockReport):
    """min_x d_x U(t, .), attained on the characteristic from x0."""
    return report.slope / (1.0 + t * report.slope)


@dataclass
class RescaledError:
    t: float
    ratio_sup: float
    raw_sup: float


def rescaled_error(U0: InitialData, report: ShockReport, t: float, window=(-1.0, 1.0),
                   n_samples: int = 401, exclusion: float = 1e-3) -> RescaledError:
    """Sup over a window of |U/target - 1|, target the rescaled Psi_i.

    With tau = T - t and X = (x - x0 - c t)/tau^(1+1/2i), the rescaled
    solution is (U - c)/tau^(1/2i) and the target is mu^-1 Psi_i(mu X).
    Points with |X| < exclusion are dropped (both sides vanish there);
    ``exclusion=None`` keeps them and raises if one is hit.
    """
    T = report.T
    if t >= T:
        raise PastBlowup(f"t = {t} is not below the blow-up time {T}")
    i = report.i
    tau = T - t
    X = np.linspace(window[0], window[1], n_samples)
    if exclusion is not None:
        X = X[np.abs(X) >= exclusion]
    elif np.any(np.abs(X) < 1e-300):
        raise ValueError("window touches X = 0 with the exclusion disabled")
    x = report.x0 + report.c * t + X * tau ** (1.0 + 1.0 / (2 * i))
    U = evolve_characteristics(U0, t, x, T, domain=(report.x0 - 10.0, report.x0 + 10.0))
    resc = (U - report.c) / tau ** (1.0 / (2 * i))
    mu = report.mu
    target = psi(i, mu * X) / mu
    ratio = np.abs(resc / target - 1.0)
    raw = np.abs(resc - target)
    return RescaledError(t, float(ratio.max()), float(raw.max()))


def dyadic_times(T: float, m_range=range(2, 15)):
    return [T - 2.0 ** (-m) for m in m_range]


def convergence_table(U0, report, m_range=range(2, 13), **kw):
    return [rescaled_error(U0, report, t, **kw) for t in dyadic_times(report.T, m_range)]
