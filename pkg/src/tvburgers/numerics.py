"""Numerical substrate: root finding, tridiagonal solves, quadrature, stencils.

Everything here is a pure function of its inputs.  Arrays are numpy
float64 throughout; the root finder and the interpolator are vectorised
so that whole grids can be processed in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import DomainTooSmall, MaxIters, NoBracket, ZeroPivot


# --------------------------------------------------------------------------
# basic types


@dataclass(frozen=True)
class Tolerance:
    abs: float = 1e-14
    rel: float = 1e-12
    max_iters: int = 200

    def __post_init__(self):
        if self.abs < 0 or self.rel < 0 or self.abs + self.rel <= 0:
            raise ValueError("Tolerance needs abs, rel >= 0 with abs + rel > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")

    def threshold(self, target):
        return self.abs + self.rel * np.abs(target)


DEFAULT_TOL = Tolerance()


class Grid1D:
    """Strictly increasing nodes on [lower, upper].

    Two node families are supported: uniform, and a sinh-stretched grid
    x = core * sinh(xi) with xi uniform, which keeps constant resolution
    near the origin and constant *relative* resolution far away.  Both
    expose ``index_coordinate`` (the fractional node index of a point),
    which is what the semi-Lagrangian interpolator works with.
    """

    def __init__(self, lower: float, upper: float, n: int, nodes=None, kind="uniform", core=None):
        if n < 5:
            raise ValueError("Grid1D needs at least 5 nodes")
        if not upper > lower:
            raise ValueError("Grid1D needs upper > lower")
        self.lower = float(lower)
        self.upper = float(upper)
        self.n = int(n)
        self.kind = kind
        self.core = core
        if nodes is None:
            if kind == "uniform":
                nodes = np.linspace(lower, upper, n)
            elif kind == "sinh":
                xi = np.linspace(math.asinh(lower / core), math.asinh(upper / core), n)
                nodes = core * np.sinh(xi)
                nodes[0], nodes[-1] = lower, upper
                if n % 2 == 1 and abs(lower + upper) < 1e-12 * upper:
                    nodes[n // 2] = 0.0
            else:
                raise ValueError(f"unknown grid kind {kind!r}")
        nodes = np.asarray(nodes, dtype=float)
        if nodes.shape != (n,):
            raise ValueError("nodes must have length n")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        self.nodes = nodes
        if kind == "uniform":
            self._x0, self._dx = self.lower, (self.upper - self.lower) / (n - 1)
        elif kind == "sinh":
            self._x0 = math.asinh(lower / core)
            self._dx = (math.asinh(upper / core) - self._x0) / (n - 1)
        else:
            self._x0 = self._dx = None

    @classmethod
    def uniform(cls, lower, upper, n):
        return cls(lower, upper, n)

    @classmethod
    def sinh(cls, half_width, n, core=1.0):
        """Symmetric stretched grid on [-half_width, half_width]."""
        return cls(-half_width, half_width, n, kind="sinh", core=float(core))

    @classmethod
    def symmetric(cls, half_width, h):
        """Uniform grid on [-L, L] containing 0, spacing at most h."""
        m = int(math.ceil(half_width / h))
        return cls(-m * h, m * h, 2 * m + 1)

    @property
    def h(self):
        """Spacing of a uniform grid (None otherwise)."""
        return self._dx if self.kind == "uniform" else None

    @property
    def param_step(self):
        """Spacing in the uniform parameter (x itself, or xi for sinh)."""
        return self._dx

    def index_coordinate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return (x - self._x0) / self._dx
        if self.kind == "sinh":
            return (np.arcsinh(x / self.core) - self._x0) / self._dx
        return np.interp(x, self.nodes, np.arange(self.n, dtype=float))

    def jacobian(self):
        """dx/dparam at the nodes (ones for a uniform grid)."""
        if self.kind == "uniform":
            return np.ones(self.n)
        if self.kind == "sinh":
            xi = self._x0 + self._dx * np.arange(self.n)
            return self.core * np.cosh(xi)
        raise ValueError("jacobian only defined for uniform and sinh grids")

    def __repr__(self):
        return f"Grid1D({self.kind}, [{self.lower:g}, {self.upper:g}], n={self.n})"


@dataclass
class Field:
    """Samples on a 1-D or 2-D tensor grid plus declared symmetries.

    ``parity`` holds one entry per axis: "odd", "even" or None.
    """

    values: np.ndarray
    grids: tuple
    parity: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(g.n for g in self.grids):
            raise ValueError("field shape does not match its grids")
        if not self.parity:
            self.parity = (None,) * len(self.grids)


def as_array(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


# --------------------------------------------------------------------------
# root finding


def invert_monotone(
    f: Callable,
    bracket: Sequence,
    target,
    tol: Tolerance = DEFAULT_TOL,
    fprime: Optional[Callable] = None,
):
    """Solve f(x) = target for x inside ``bracket`` (f strictly monotone).

    Bisection until the bracket is narrower than 1e-3, then Newton (with
    the analytic derivative when given, a secant slope otherwise); any
    Newton iterate leaving the current bracket is replaced by the
    midpoint.  Works elementwise on arrays; ``f`` must be vectorised.
    """
    lo = np.asarray(bracket[0], dtype=float)
    hi = np.asarray(bracket[1], dtype=float)
    t = np.asarray(target, dtype=float)
    scalar = lo.ndim == 0 and hi.ndim == 0 and t.ndim == 0
    shape = np.broadcast_shapes(lo.shape, hi.shape, t.shape)
    lo = np.array(np.broadcast_to(lo, shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, shape), dtype=float)
    t = np.broadcast_to(t, shape)

    glo = f(lo) - t
    ghi = f(hi) - t
    if np.any(np.isnan(glo)) or np.any(np.isnan(ghi)) or np.any(glo * ghi > 0):
        raise NoBracket("f(lo) and f(hi) do not straddle the target")

    # orient so that g(a) <= 0 <= g(b)
    flip = glo > 0
    a = np.where(flip, hi, lo)
    b = np.where(flip, lo, hi)
    ga = np.where(flip, ghi, glo)
    gb = np.where(flip, glo, ghi)
    thr = tol.threshold(t)

    x = np.where(np.abs(ga) <= thr, a, np.where(np.abs(gb) <= thr, b, 0.5 * (a + b)))
    gx = f(x) - t
    done = np.abs(gx) <= thr

    for _ in range(tol.max_iters):
        if np.all(done):
            break
        width = np.abs(b - a)
        newton = width <= 1e-3
        if fprime is not None:
            slope = fprime(x)
        else:
            slope = (gb - ga) / np.where(b != a, b - a, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - gx / slope
        lo_, hi_ = np.minimum(a, b), np.maximum(a, b)
        inside = np.isfinite(xn) & (xn > lo_) & (xn < hi_)
        mid = 0.5 * (a + b)
        xn = np.where(newton & inside, xn, mid)
        xn = np.where(done, x, xn)
        gn = f(xn) - t
        neg = gn <= 0
        a = np.where(~done & neg, xn, a)
        ga = np.where(~done & neg, gn, ga)
        b = np.where(~done & ~neg, xn, b)
        gb = np.where(~done & ~neg, gn, gb)
        x, gx = xn, gn
        collapsed = np.abs(b - a) <= 4 * np.spacing(np.maximum(np.abs(a), np.abs(b)))
        done = done | (np.abs(gx) <= thr) | collapsed
    else:
        if not np.all(done):
            raise MaxIters(f"tolerance unmet after {tol.max_iters} iterations")
    if not np.all(done):
        raise MaxIters(f"tolerance unmet after {tol.max_iters} iterations")
    return float(x) if scalar else x


# --------------------------------------------------------------------------
# tridiagonal systems


@dataclass
class TridiagonalSystem:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.diag.shape[0]
        if self.lower.shape != (n - 1,) or self.upper.shape != (n - 1,):
            raise ValueError("lower/upper must have length n-1")
        if self.rhs.shape[0] != n:
            raise ValueError("rhs must have n rows")

    @property
    def n(self):
        return self.diag.shape[0]

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag.reshape((-1,) + (1,) * (x.ndim - 1)) * x
        lo = self.lower.reshape((-1,) + (1,) * (x.ndim - 1))
        up = self.upper.reshape((-1,) + (1,) * (x.ndim - 1))
        y[1:] += lo * x[:-1]
        y[:-1] += up * x[1:]
        return y

    def is_diagonally_dominant(self):
        off = np.zeros(self.n)
        off[1:] += np.abs(self.lower)
        off[:-1] += np.abs(self.upper)
        return bool(np.all(np.abs(self.diag) >= off))


def solve_tridiagonal(system: TridiagonalSystem, backend: str = "thomas") -> np.ndarray:
    """Solve a tridiagonal system; ``rhs`` may carry extra trailing columns.

    backend "thomas" is the plain forward-elimination/back-substitution
    sweep (no pivoting).  backend "lapack" hands the same system to
    LAPACK's gtsv, which is what the long time-stepping loops use.
    """
    n = system.n
    if backend == "lapack":
        rhs = system.rhs
        b = rhs.reshape(n, -1) if rhs.ndim > 1 else rhs
        _, _, _, x, info = lapack.dgtsv(system.lower, system.diag, system.upper, b)
        if info != 0:
            raise ZeroPivot(f"LAPACK gtsv reported a singular pivot (info={info})")
        return x.reshape(rhs.shape)
    if backend != "thomas":
        raise ValueError(f"unknown backend {backend!r}")

    a, b, c = system.lower, system.diag, system.upper
    d = system.rhs
    scale = np.max(np.abs(b)) if n else 1.0
    cp = np.empty(max(n - 1, 0))
    dp = np.empty_like(d)
    piv = b[0]
    if abs(piv) <= 1e-300 * max(scale, 1.0) or piv == 0:
        raise ZeroPivot("vanishing pivot at row 0")
    if n > 1:
        cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if piv == 0 or not np.isfinite(piv):
            raise ZeroPivot(f"vanishing pivot at row {i}")
        if i < n - 1:
            cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / piv
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


# --------------------------------------------------------------------------
# quadrature

RHO_CUT = 14.0
RHO_MIN_COVER = 13.0


def simpson(y, x):
    """Composite Simpson over the last axis (uniform x, falls back to scipy)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    dx = np.diff(x)
    if n % 2 == 1 and n >= 3 and np.allclose(dx, dx[0], rtol=1e-10, atol=0):
        h = dx[0]
        return h / 3.0 * (y[..., 0] + y[..., -1] + 4.0 * y[..., 1:-1:2].sum(axis=-1)
                          + 2.0 * y[..., 2:-1:2].sum(axis=-1))
    from scipy.integrate import simpson as _simpson

    return _simpson(y, x=x, axis=-1)


def weighted_inner_product(f, g, grid: Grid1D, weight_id: str = "gaussian_rho", weight=None,
                           return_error: bool = False):
    """Quadrature of  int f g w dY  over the grid.

    For ``gaussian_rho`` the weight is exp(-Y^2/4) and the integral is
    truncated at |Y| = 14; the grid must reach |Y| >= 13 on both sides.
    With ``return_error`` the pair (value, error estimate) is returned,
    the estimate being |Simpson - trapezoid| plus a bound on the tail.
    """
    Y = grid.nodes
    fv, gv = as_array(f), as_array(g)
    if weight_id == "gaussian_rho":
        if Y[0] > -RHO_MIN_COVER or Y[-1] < RHO_MIN_COVER:
            raise DomainTooSmall(f"grid must cover |Y| <= {RHO_MIN_COVER}")
        keep = np.abs(Y) <= RHO_CUT + 1e-12
        w = np.exp(-0.25 * Y[keep] ** 2)
        integrand = fv[..., keep] * gv[..., keep] * w
        x = Y[keep]
        edge = max(abs(x[0]), abs(x[-1]))
        tail = 2.0 * np.max(np.abs(fv * gv)) * math.exp(-0.25 * edge**2) * 2.0 / edge
    elif weight_id == "custom":
        if weight is None:
            raise ValueError("custom weight requires weight=")
        integrand = fv * gv * as_array(weight)
        x = Y
        tail = 0.0
    else:
        raise ValueError(f"unknown weight {weight_id!r}")
    value = simpson(integrand, x)
    if not return_error:
        return float(value) if np.ndim(value) == 0 else value
    trap = np.trapezoid(integrand, x, axis=-1)
    return float(value), float(np.max(np.abs(value - trap)) + tail)


# --------------------------------------------------------------------------
# finite-difference stencils


def fd_weights(offsets, order: int) -> np.ndarray:
    """Weights w with sum w_j f(x + o_j h) = h^order f^(order)(x) + O(h^p)."""
    o = np.asarray(offsets, dtype=float)
    m = o.size
    A = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


_CENTERED = {
    1: (np.arange(-2, 3), fd_weights(np.arange(-2, 3), 1)),
    2: (np.arange(-2, 3), fd_weights(np.arange(-2, 3), 2)),
    3: (np.arange(-3, 4), fd_weights(np.arange(-3, 4), 3)),
    4: (np.arange(-3, 4), fd_weights(np.arange(-3, 4), 4)),
}


def fd_derivative(func: Callable, x, order: int = 1, h: float = 1e-3, richardson: bool = True):
    """Centered fourth-order derivative of a callable, optionally Richardson-improved."""
    offsets, w = _CENTERED[order]
    x = np.asarray(x, dtype=float)

    def stencil(step):
        acc = 0.0
        for o, wj in zip(offsets, w):
            if wj != 0.0:
                acc = acc + wj * func(x + o * step)
        return acc / step**order

    d1 = stencil(h)
    if not richardson:
        return d1
    d2 = stencil(0.5 * h)
    return (16.0 * d2 - d1) / 15.0


def grid_derivative(values, grid: Grid1D, axis: int = -1, order: int = 1):
    """Fourth-order derivative of sampled values along one axis.

    Centered in the interior, one-sided (same order) at the two edges.
    For sinh grids the derivative is taken in the uniform parameter and
    mapped back with the chain rule (first order only).
    """
    if order not in (1, 2):
        raise ValueError("grid_derivative supports orders 1 and 2")
    if grid.kind == "sinh" and order != 1:
        raise ValueError("second derivatives on sinh grids are not provided")
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    n = v.shape[-1]
    step = grid.param_step
    out = np.empty_like(v)
    offs = np.arange(-2, 3)
    wc = fd_weights(offs, order)
    out[..., 2:-2] = sum(wj * v[..., 2 + o: n - 2 + o] for o, wj in zip(offs, wc))
    for i in (0, 1):
        o = np.arange(6) - i
        wl = fd_weights(o, order)
        out[..., i] = sum(wj * v[..., i + oj] for oj, wj in zip(o, wl))
        ir = n - 1 - i
        o = -np.arange(6) + i
        wr = fd_weights(o, order)
        out[..., ir] = sum(wj * v[..., ir + oj] for oj, wj in zip(o, wr))
    out /= step**order
    if grid.kind == "sinh":
        out /= grid.jacobian()
    return np.moveaxis(out, -1, axis)


# --------------------------------------------------------------------------
# monotone cubic interpolation in index space


def monotone_slopes(y):
    """Node slopes (unit spacing, last axis) limited for monotonicity.

    Fourth-order centered slopes in the interior, then the Hyman filter:
    a slope is zeroed at a discrete extremum and otherwise clamped to
    three times the smaller adjacent secant, which keeps each cubic
    piece inside the Fritsch-Carlson monotonicity region.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    d = np.diff(y, axis=-1)
    m = np.empty_like(y)
    m[..., 2:-2] = (-y[..., 4:] + 8.0 * y[..., 3:-1] - 8.0 * y[..., 1:-3] + y[..., :-4]) / 12.0
    m[..., 1] = 0.5 * (y[..., 2] - y[..., 0])
    m[..., n - 2] = 0.5 * (y[..., n - 1] - y[..., n - 3])
    m[..., 0] = 0.5 * (-3.0 * y[..., 0] + 4.0 * y[..., 1] - y[..., 2])
    m[..., n - 1] = 0.5 * (3.0 * y[..., n - 1] - 4.0 * y[..., n - 2] + y[..., n - 3])

    dl, dr = d[..., :-1], d[..., 1:]
    sgn = np.sign(dl)
    lim = 3.0 * np.minimum(np.abs(dl), np.abs(dr))
    inner = np.clip(sgn * m[..., 1:-1], 0.0, lim) * sgn
    m[..., 1:-1] = np.where(dl * dr > 0, inner, 0.0)
    for i, di in ((0, d[..., 0]), (n - 1, d[..., -1])):
        s = np.sign(di)
        m[..., i] = s * np.clip(s * m[..., i], 0.0, 3.0 * np.abs(di))
    return m


def monotone_cubic(y, t, slopes=None):
    """Evaluate the monotone cubic Hermite interpolant of y at index coords t.

    y has shape (..., n).  t is either 1-D (the same query points for all
    leading indices) or has the full leading shape (..., m).  Queries
    outside [0, n-1] are clamped to the end nodes.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    m = monotone_slopes(y) if slopes is None else slopes
    t = np.clip(np.asarray(t, dtype=float), 0.0, n - 1.0)
    idx = np.minimum(np.floor(t).astype(np.intp), n - 2)
    u = t - idx
    if t.ndim == 1:
        y0, y1 = y[..., idx], y[..., idx + 1]
        m0, m1 = m[..., idx], m[..., idx + 1]
    else:
        y0 = np.take_along_axis(y, idx, axis=-1)
        y1 = np.take_along_axis(y, idx + 1, axis=-1)
        m0 = np.take_along_axis(m, idx, axis=-1)
        m1 = np.take_along_axis(m, idx + 1, axis=-1)
    u2 = u * u
    u3 = u2 * u
    h00 = 2.0 * u3 - 3.0 * u2 + 1.0
    h10 = u3 - 2.0 * u2 + u
    h01 = 1.0 - h00
    h11 = u3 - u2
    return h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
