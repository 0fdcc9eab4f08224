"""Closed-form profile families and their derivatives.

Shock profiles Psi_i (inverse of X = -Psi - Psi^(2i+1)), the quadratic
heat profile F_k(Z) = 1/(1 + Z^2k), the linearised eigenfunctions, the
2-D stationary profile Theta, the approximate heat profiles and the
blended profile Q used to initialise the 2-D solver.

Derivatives of functions of Psi are exact: a function P(Psi)/D(Psi)^r
with D = 1 + (2i+1) Psi^(2i) differentiates in X to another function of
the same shape, so every order is a polynomial evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from .errors import IndexOutOfRange, ProfileVanishes
from .numerics import Tolerance, invert_monotone

MAX_INDEX = 12
_PSI_TOL = Tolerance(abs=1e-13, rel=1e-15)


def alpha(i: int) -> float:
    return 1.0 + 1.0 / (2 * i)


# --------------------------------------------------------------------------
# frame bookkeeping


@dataclass(frozen=True)
class SelfSimilarFrame:
    """Scaling parameters and the physical <-> self-similar coordinate maps.

    X = sqrt(b/6) x / (T-t)^alpha_i,  Y = a^(1/2k) y / sqrt(T-t),
    s = -log(T-t),  Z = exp(-(k-1)s/(2k)) Y,  u = sqrt(6/b)(T-t)^(1/2i) v.
    k = 1 marks the stable (non-flat) case.
    """

    i: int = 1
    k: int = 2
    a: float = 1.0
    b: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.i < 1 or self.k < 1 or self.a <= 0 or self.b <= 0 or self.T <= 0:
            raise ValueError("SelfSimilarFrame needs i >= 1, k >= 1 and a, b, T > 0")

    @property
    def alpha_i(self) -> float:
        return alpha(self.i)

    @property
    def z_rate(self) -> float:
        """(k-1)/(2k): Z = exp(-z_rate*s) * Y."""
        return (self.k - 1) / (2.0 * self.k)

    def z_of_y(self, s, Y):
        return np.exp(-self.z_rate * np.asarray(s, dtype=float)) * Y

    def y_of_z(self, s, Z):
        return np.exp(self.z_rate * np.asarray(s, dtype=float)) * Z

    def to_selfsimilar(self, t, x, y):
        tau = self.T - np.asarray(t, dtype=float)
        s = -np.log(tau)
        X = math.sqrt(self.b / 6.0) * x / tau**self.alpha_i
        Y = self.a ** (1.0 / (2 * self.k)) * y / np.sqrt(tau)
        return s, X, Y, self.z_of_y(s, Y)

    def to_physical(self, s, X, Y):
        tau = np.exp(-np.asarray(s, dtype=float))
        t = self.T - tau
        x = X * tau**self.alpha_i / math.sqrt(self.b / 6.0)
        y = Y * np.sqrt(tau) / self.a ** (1.0 / (2 * self.k))
        return t, x, y

    def value_to_selfsimilar(self, s, u):
        return u / (math.sqrt(6.0 / self.b) * np.exp(-np.asarray(s) / (2 * self.i)))

    def value_to_physical(self, s, v):
        return math.sqrt(6.0 / self.b) * np.exp(-np.asarray(s) / (2 * self.i)) * v


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth cut-off chi: 1 on [-1, 1], 0 outside [-2, 2], C^2 in between.

    The transition is 1 - S(|x| - 1) with the quintic smoothstep
    S(t) = 6t^5 - 15t^4 + 10t^3, so |chi'| <= 15/8 and |chi''| <= 10/sqrt(3).
    """

    d: float = 0.1

    D1_BOUND = 15.0 / 8.0
    D2_BOUND = 10.0 / math.sqrt(3.0)

    def chi(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        t = np.clip(np.abs(x) - 1.0, 0.0, 1.0)
        if order == 0:
            return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)
        sg = np.sign(x)
        if order == 1:
            return -sg * 30.0 * t * t * (1.0 - t) ** 2
        if order == 2:
            return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
        raise ValueError("chi derivatives up to order 2")

    def chi_d(self, s, Y):
        """chi(Y / (d e^{s/2}))."""
        return self.chi(np.asarray(Y) / (self.d * np.exp(0.5 * np.asarray(s))))


# --------------------------------------------------------------------------
# rational-function derivative engine


@dataclass(frozen=True)
class _Rational:
    """P(x) / E(x)^r for a fixed denominator polynomial E."""

    P: Polynomial
    r: int

    def deriv(self, E: Polynomial, implicit: bool = False) -> "_Rational":
        num = self.P.deriv() * E - self.r * self.P * E.deriv()
        if implicit:
            # x = Psi(X) with dPsi/dX = -1/E(Psi)
            return _Rational(-num, self.r + 2)
        return _Rational(num, self.r + 1)

    def __call__(self, x, e_inv):
        return self.P(x) * e_inv**self.r


def _psi_denominator(i: int) -> Polynomial:
    n = 2 * i + 1
    c = np.zeros(n)
    c[0], c[n - 1] = 1.0, float(n)
    return Polynomial(c)


@lru_cache(maxsize=None)
def _psi_chain(i: int, j: int, order: int) -> _Rational:
    """Rational form of d^order/dX^order of (-1)^j Psi^j / D(Psi) (j >= 0),
    or of Psi itself when j = -1."""
    D = _psi_denominator(i)
    if j == -1:
        if order == 0:
            return _Rational(Polynomial([0.0, 1.0]), 0)
        R = _Rational(Polynomial([-1.0]), 1)
        for _ in range(order - 1):
            R = R.deriv(D, implicit=True)
        return R
    c = np.zeros(j + 1)
    c[j] = (-1.0) ** j
    R = _Rational(Polynomial(c), 1)
    for _ in range(order):
        R = R.deriv(D, implicit=True)
    return R


@lru_cache(maxsize=None)
def _fk_chain(k: int, ell: int, power: int, order: int) -> _Rational:
    """Rational form of d^order/du^order of u^ell / (1 + u^2k)^power."""
    E = Polynomial([1.0] + [0.0] * (2 * k - 1) + [1.0])
    c = np.zeros(ell + 1)
    c[ell] = 1.0
    R = _Rational(Polynomial(c), power)
    for _ in range(order):
        R = R.deriv(E)
    return R


# --------------------------------------------------------------------------
# Burgers profiles


def psi1_closed_form(X):
    """Cardano formula for the root of X = -Psi - Psi^3.

    Psi = cbrt(-X/2 + sqrt(1/27 + X^2/4)) + cbrt(-X/2 - sqrt(1/27 + X^2/4)),
    evaluated on |X| with the odd symmetry restored afterwards.  The
    cancelling radicand -|X|/2 + sqrt(...) is rewritten as
    (1/27)/(|X|/2 + sqrt(...)) so large |X| keeps full precision.
    """
    X = np.asarray(X, dtype=float)
    ax = np.abs(X)
    root = np.sqrt(1.0 / 27.0 + 0.25 * ax * ax)
    small = (1.0 / 27.0) / (0.5 * ax + root)
    big = -0.5 * ax - root
    val = np.cbrt(small) + np.cbrt(big)
    out = np.where(X < 0, -val, val)
    return float(out) if out.ndim == 0 else out


def _psi_value(i: int, X):
    X = np.asarray(X, dtype=float)
    ax = np.abs(X)
    if i == 1:
        # evaluated on |X| so the odd symmetry is exact; one Newton polish
        # on X + Psi + Psi^3 = 0
        p = -np.asarray(psi1_closed_form(ax), dtype=float)
        p = p - (p + p**3 - ax) / (1.0 + 3.0 * p * p)
        return np.where(X < 0, p, -p)
    n = 2 * i + 1
    # p = -Psi(|X|) >= 0 solves p + p^n = |X|
    upper = np.minimum(ax, ax ** (1.0 / n))
    lower = np.maximum(np.maximum(ax - upper**n, np.maximum(ax - upper, 0.0) ** (1.0 / n)), 0.0)
    lower = np.minimum(lower, upper)
    p = invert_monotone(
        lambda q: q + q**n,
        (lower, upper),
        ax,
        tol=_PSI_TOL,
        fprime=lambda q: 1.0 + n * q ** (n - 1),
    )
    p = np.asarray(p, dtype=float)
    p = p - (p + p**n - ax) / (1.0 + n * p ** (n - 1))
    return np.where(X < 0, p, -p)


def psi(i: int, X, order: int = 0):
    """Psi_i or one of its X-derivatives (any order >= 0)."""
    if i < 1:
        raise IndexOutOfRange("profile index i must be >= 1")
    X = np.asarray(X, dtype=float)
    p = _psi_value(i, X)
    if order == 0:
        out = p
    else:
        D = 1.0 + (2 * i + 1) * p ** (2 * i)
        out = _psi_chain(i, -1, order)(p, 1.0 / D)
    return float(out) if np.ndim(out) == 0 else out


def psi_derivatives(i: int, X, max_order: int):
    """[Psi, Psi', ..., Psi^(max_order)] sharing a single root solve."""
    X = np.asarray(X, dtype=float)
    p = _psi_value(i, X)
    Dinv = 1.0 / (1.0 + (2 * i + 1) * p ** (2 * i))
    return [p] + [_psi_chain(i, -1, m)(p, Dinv) for m in range(1, max_order + 1)]


def psi_ode_residual(i: int, X):
    """-(1/2i)Psi + ((2i+1)/2i) X Psi' + Psi Psi'."""
    p, dp = psi_derivatives(i, X, 1)
    return -p / (2 * i) + alpha(i) * X * dp + p * dp


def psi_branch_assembly(i_left: int, i_right: int, mu_left: float, mu_right: float, X):
    """Continuous odd-type profile made of two scaled Psi branches.

    Uses mu^{-1} Psi_{i}(mu X) for X < 0 and X >= 0 separately.  No
    regularity claim is made at the junction.
    """
    X = np.asarray(X, dtype=float)
    left = psi(i_left, mu_left * X) / mu_left
    right = psi(i_right, mu_right * X) / mu_right
    return np.where(X < 0, left, right)


# --------------------------------------------------------------------------
# heat profile


def f_k(k: int, a: float, Z, order: int = 0):
    """d^order/dZ^order of F_k(aZ) = 1/(1 + (aZ)^2k)."""
    if k < 1:
        raise IndexOutOfRange("k must be >= 1")
    u = a * np.asarray(Z, dtype=float)
    einv = 1.0 / (1.0 + u ** (2 * k))
    out = _fk_chain(k, 0, 1, order)(u, einv) * a**order
    return float(out) if np.ndim(out) == 0 else out


def _zpow_fpow(k: int, a: float, ell: int, power: int, Z, order: int):
    """d^order/dZ^order of Z^ell F_k(aZ)^power."""
    Z = np.asarray(Z, dtype=float)
    u = a * Z
    einv = 1.0 / (1.0 + u ** (2 * k))
    # Z^ell = u^ell / a^ell
    return _fk_chain(k, ell, power, order)(u, einv) * a ** (order - ell)


# --------------------------------------------------------------------------
# eigenfunctions


def _check_index(*idx):
    for v in idx:
        if not (0 <= v <= MAX_INDEX):
            raise IndexOutOfRange(f"index {v} outside 0..{MAX_INDEX}")


def phi_x(i: int, j: int, X, order: int = 0):
    """(-1)^j Psi_i^j / (1 + (2i+1) Psi_i^2i) and its X-derivatives."""
    _check_index(j)
    X = np.asarray(X, dtype=float)
    p = _psi_value(i, X)
    Dinv = 1.0 / (1.0 + (2 * i + 1) * p ** (2 * i))
    return _psi_chain(i, j, order)(p, Dinv)


def phi_x_eigenvalue(i: int, j: int) -> float:
    return (j - 2 * i - 1) / (2.0 * i)


def phi_z(k: int, a: float, ell: int, Z, order: int = 0):
    """Z^ell / (1 + (aZ)^2k)^2."""
    _check_index(ell)
    return _zpow_fpow(k, a, ell, 2, Z, order)


def phi_z_eigenvalue(k: int, ell: int) -> float:
    return (ell - 2 * k) / (2.0 * k)


def psi_ell(k: int, a: float, ell: int, Z, order: int = 0):
    """Z^ell / (1 + (aZ)^2k)^4."""
    _check_index(ell)
    return _zpow_fpow(k, a, ell, 4, Z, order)


def psi_ell_eigenvalue(k: int, ell: int) -> float:
    return ell / (2.0 * k)


def hermite_polynomial_sum(ell: int, Y):
    """Unnormalised sum  sum_n ell!/(n!(ell-2n)!) (-1)^n Y^(ell-2n)."""
    Y = np.asarray(Y, dtype=float)
    out = np.zeros_like(Y)
    for n in range(ell // 2 + 1):
        out = out + math.factorial(ell) / (math.factorial(n) * math.factorial(ell - 2 * n)) * (-1) ** n * Y ** (ell - 2 * n)
    return out


def hermite_norm_constant(ell: int) -> float:
    """c_ell making h_ell unit-norm for the weight exp(-Y^2/4)."""
    return 1.0 / math.sqrt(2.0 ** (ell + 1) * math.factorial(ell) * math.sqrt(math.pi))


def hermite(ell: int, Y, order: int = 0):
    """Orthonormal Hermite function h_ell of L^2(exp(-Y^2/4) dY).

    Three-term recursion h_{l+1} = (Y h_l - sqrt(2l) h_{l-1}) / sqrt(2(l+1)),
    derivatives from h_l' = sqrt(l/2) h_{l-1}.
    """
    _check_index(ell)
    if order > ell:
        return np.zeros_like(np.asarray(Y, dtype=float))
    scale = 1.0
    for m in range(ell, ell - order, -1):
        scale *= math.sqrt(m / 2.0)
    target = ell - order
    Y = np.asarray(Y, dtype=float)
    h_prev = np.zeros_like(Y)
    h = np.full_like(Y, (2.0 * math.sqrt(math.pi)) ** -0.5)
    for m in range(target):
        h_prev, h = h, (Y * h - math.sqrt(2.0 * m) * h_prev) / math.sqrt(2.0 * (m + 1))
    return scale * h


def hermite_eigenvalue(ell: int) -> float:
    return (ell - 2) / 2.0


def theta_2d(frame: SelfSimilarFrame, X, Z, order_X: int = 0, order_Z: int = 0):
    """Theta[a,b](X,Z) = b^-1 F^(-1/2i) Psi_i(b F^alpha X), F = F_k(aZ).

    order_X up to 4, order_Z 0 or 1 (mixed derivatives allowed).
    """
    if order_Z not in (0, 1):
        raise ValueError("order_Z must be 0 or 1")
    i, k, a, b = frame.i, frame.k, frame.a, frame.b
    al = alpha(i)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    F = f_k(k, a, Z)
    u = b * F**al * X
    m = order_X
    e_m = m * al - 1.0 / (2 * i)
    ders = psi_derivatives(i, u, m + order_Z)
    if order_Z == 0:
        return b ** (m - 1) * F**e_m * ders[m]
    FZ = f_k(k, a, Z, 1)
    return b ** (m - 1) * FZ * F ** (e_m - 1.0) * (e_m * ders[m] + al * u * ders[m + 1])


def theta_residual(frame: SelfSimilarFrame, X, Z):
    """-(1/2i)w + alpha X w_X + (1/2k) Z w_Z + w w_X at w = Theta."""
    w = theta_2d(frame, X, Z)
    wx = theta_2d(frame, X, Z, 1, 0)
    wz = theta_2d(frame, X, Z, 0, 1)
    return -w / (2 * frame.i) + frame.alpha_i * X * wx + Z * wz / (2 * frame.k) + w * wx


def phi_jl_2d(k: int, j: int, ell: int, X, Z, order_X: int = 0, order_Z: int = 0):
    """Z^ell F^(1-j/2) phi_{X,j}(F^(3/2) X) with F = F_k(Z), i = 1."""
    _check_index(j, ell)
    if order_Z not in (0, 1):
        raise ValueError("order_Z must be 0 or 1")
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    F = f_k(k, 1.0, Z)
    u = F**1.5 * X
    m = order_X
    c = 1.0 - 0.5 * j + 1.5 * m
    G = phi_x(1, j, u, m)
    if order_Z == 0:
        return Z**ell * F**c * G
    G1 = phi_x(1, j, u, m + 1)
    FZ = f_k(k, 1.0, Z, 1)
    zl1 = ell * Z ** (ell - 1) if ell > 0 else 0.0
    return F**c * (zl1 * G + Z**ell * (FZ / F) * (c * G + 1.5 * u * G1))


def phi_jl_eigenvalue(k: int, j: int, ell: int) -> float:
    return (j - 3) / 2.0 + (ell - 2 * k) / (2.0 * k) + 1.0


def eigenfunction(family: str, point, order: int = 0, **params):
    """Uniform entry point: family in phi_X, phi_Z, psi_ell, hermite, phi_jl_2d."""
    if family == "phi_X":
        return phi_x(params["i"], params["j"], point, order)
    if family == "phi_Z":
        return phi_z(params["k"], params.get("a", 1.0), params["ell"], point, order)
    if family == "psi_ell":
        return psi_ell(params["k"], params.get("a", 1.0), params["ell"], point, order)
    if family == "hermite":
        return hermite(params["ell"], point, order)
    if family == "phi_jl_2d":
        X, Z = point
        ox, oz = (order, 0) if np.ndim(order) == 0 else order
        return phi_jl_2d(params["k"], params["j"], params["ell"], X, Z, ox, oz)
    raise IndexOutOfRange(f"unknown eigenfunction family {family!r}")


# --------------------------------------------------------------------------
# approximate heat profiles


def approx_profile_coefficients(k: int) -> np.ndarray:
    """(c_0, c_2, ..., c_{2k-2}) from c_{2k-2} = -2k(2k-1) and
    c_{2l} = -((2l+2)(2l+1)/(k-l)) c_{2l+2}."""
    if k < 2:
        raise IndexOutOfRange("approximate profile needs k >= 2")
    c = np.zeros(k)
    c[k - 1] = -2.0 * k * (2 * k - 1)
    for ell in range(k - 2, -1, -1):
        c[ell] = -((2 * ell + 2) * (2 * ell + 1) / (k - ell)) * c[ell + 1]
    return c


def correction_coefficients(k: int) -> np.ndarray:
    """Coefficients actually multiplying eps^(2k-2l) phi_2l in F[a].

    The recursion above fixes the ratios; balancing the Y^(2k-2)
    coefficient of the residual against -eps^2 F_k'' fixes the overall
    sign, which is the opposite of the seed value.
    """
    return -approx_profile_coefficients(k)


def _approx_parts(k: int, a: float, s: float, Y, max_order: int = 2):
    Y = np.asarray(Y, dtype=float)
    beta = (k - 1) / (2.0 * k)
    eps = a * math.exp(-beta * s)
    Z = eps * Y
    c = correction_coefficients(k)
    F = [f_k(k, 1.0, Z, m) for m in range(max_order + 1)]
    G = [np.zeros_like(Z) for _ in range(max_order + 1)]
    bracket = Z * F[1]
    for ell in range(k):
        amp = c[ell] * eps ** (2 * k - 2 * ell)
        phis = [phi_z(k, 1.0, 2 * ell, Z, m) for m in range(max_order + 1)]
        for m in range(max_order + 1):
            G[m] = G[m] + amp * phis[m]
        bracket = bracket + amp * ((2 * k - 2 * ell) * phis[0] + Z * phis[1])
    return dict(eps=eps, Z=Z, beta=beta, F=F, G=G, bracket=bracket)


def approx_profile_F(k: int, a: float, s: float, Y, order: int = 0):
    """F[a](s,Y) = F_k(Z) + sum_l c_l eps^(2k-2l) phi_2l(Z), eps = a e^{-(k-1)s/2k},
    Z = eps Y; ``order`` counts Y-derivatives (0..2)."""
    if s <= 0:
        raise ValueError("approximate profile needs s > 0")
    p = _approx_parts(k, a, s, Y)
    out = (p["F"][order] + p["G"][order]) * p["eps"] ** order
    return float(out) if np.ndim(out) == 0 else out


def approx_profile_ds(k, a, s, Y):
    """d/ds of F[a] at fixed (a, Y)."""
    p = _approx_parts(k, a, s, Y, 1)
    return -p["beta"] * p["bracket"]


def approx_profile_da(k, a, s, Y):
    """d/da of F[a] at fixed (s, Y)."""
    p = _approx_parts(k, a, s, Y, 1)
    return p["bracket"] / a


def approx_profile_residual(k: int, a: float, s: float, Y):
    """F_s + F + (Y/2) F_Y - F^2 - F_YY for F = F[a] with a_s = 0.

    Written in Z = eps Y, where F_s = -beta (eps d_eps + Z d_Z),
    (Y/2) d_Y = (Z/2) d_Z and d_YY = eps^2 d_ZZ.  The O(1) part
    F_k + (Z/2k) F_k' - F_k^2 is formed as F_k (1 - F_k) - Z^2k F_k^2
    with both products evaluated from the same factors, so it carries no
    rounding residue; the remaining terms are all small near the origin,
    which keeps the result accurate down to e^{-2(k-1)s} and below.
    """
    p = _approx_parts(k, a, s, Y)
    Z, eps, beta = p["Z"], p["eps"], p["beta"]
    Fk = p["F"][0]
    z2k = Z ** (2 * k)
    one_minus = z2k * Fk
    stationary = Fk * one_minus - z2k * Fk * Fk
    G, G1, G2 = p["G"]
    c = correction_coefficients(k)
    lin = np.zeros_like(Z)
    for ell in range(k):
        m = 2 * k - 2 * ell
        amp = c[ell] * eps**m
        ph = phi_z(k, 1.0, 2 * ell, Z)
        ph1 = phi_z(k, 1.0, 2 * ell, Z, 1)
        lin = lin + amp * ((1.0 - beta * m) * ph + (0.5 - beta) * Z * ph1 - 2.0 * Fk * ph)
    return stationary - eps**2 * p["F"][2] + lin - eps**2 * G2 - G * G


def stable_profile_F(s: float, a: float, Y, order: int = 0):
    """1/(1 + (1/(8s)+a) Y^2) + (1/(4s) + 2a)/(1 + (1/(8s)+a) Y^2)^2.

    ``order`` counts Y-derivatives (0..2); use stable_profile_ds for d/ds.
    """
    if s <= 1:
        raise ValueError("stable profile needs s > 1")
    Y = np.asarray(Y, dtype=float)
    q = 1.0 / (8.0 * s) + a
    c = 1.0 / (4.0 * s) + 2.0 * a
    E = 1.0 + q * Y * Y
    if order == 0:
        out = 1.0 / E + c / E**2
    elif order == 1:
        Ey = 2.0 * q * Y
        out = -Ey / E**2 - 2.0 * c * Ey / E**3
    elif order == 2:
        Ey = 2.0 * q * Y
        out = (-2.0 * q / E**2 + 2.0 * Ey**2 / E**3
               - 2.0 * c * (2.0 * q / E**3 - 3.0 * Ey**2 / E**4))
    else:
        raise ValueError("stable profile derivatives up to order 2")
    return float(out) if out.ndim == 0 else out


def stable_profile_ds(s: float, a: float, Y, a_s: float = 0.0):
    Y = np.asarray(Y, dtype=float)
    q = 1.0 / (8.0 * s) + a
    c = 1.0 / (4.0 * s) + 2.0 * a
    qs = -1.0 / (8.0 * s * s) + a_s
    cs = -1.0 / (4.0 * s * s) + 2.0 * a_s
    E = 1.0 + q * Y * Y
    Es = qs * Y * Y
    return -Es / E**2 + cs / E**2 - 2.0 * c * Es / E**3


def stable_profile_da(s: float, a: float, Y):
    """d/da of the stable profile at fixed (s, Y)."""
    Y = np.asarray(Y, dtype=float)
    q = 1.0 / (8.0 * s) + a
    c = 1.0 / (4.0 * s) + 2.0 * a
    E = 1.0 + q * Y * Y
    return (-Y * Y + 2.0) / E**2 - 2.0 * c * Y * Y / E**3


def stable_profile_residual(s: float, a: float, Y, a_s: float = 0.0):
    """Left side of the (NLH) equation applied to the stable profile."""
    F = stable_profile_F(s, a, Y)
    return (stable_profile_ds(s, a, Y, a_s) + F + 0.5 * Y * stable_profile_F(s, a, Y, 1)
            - F * F - stable_profile_F(s, a, Y, 2))


# --------------------------------------------------------------------------
# blended 2-D profile


def _poly_times_gauss_derivs(order, f, g, X, c, n, n_fact):
    """d^order/dX^order of (-fX + g X^n / n!) exp(-c X^4)."""
    # p^(r)
    pd = []
    for r in range(order + 1):
        term = np.zeros(np.broadcast_shapes(np.shape(X), np.shape(f), np.shape(c)))
        if r == 0:
            term = term - f * X
        elif r == 1:
            term = term - f
        if r <= n:
            term = term + g / n_fact * (math.factorial(n) / math.factorial(n - r)) * X ** (n - r)
        pd.append(term)
    # q^(r) = R_r(X) q with R_0 = 1, R_{r+1} = R_r' - 4cX^3 R_r; store R_r as {power: coeff}
    R = [{0: 1.0}]
    for r in range(order):
        nxt = {}
        for pw, co in R[-1].items():
            if pw > 0:
                nxt[pw - 1] = nxt.get(pw - 1, 0.0) + pw * co
            nxt[pw + 3] = nxt.get(pw + 3, 0.0) - 4.0 * c * co
        R.append(nxt)
    q = np.exp(-c * X**4)
    out = 0.0
    for r in range(order + 1):
        Rr = sum(co * X**pw for pw, co in R[order - r].items())
        out = out + math.comb(order, r) * pd[r] * Rr
    return out * q


def interior_theta(f, g, X, i: int = 1, order_X: int = 0):
    """mu^-1 f^(-1/2i) Psi_i(f^alpha mu X), mu = (g/((2i+1)! f^(2i+2)))^(1/2i)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n = 2 * i + 1
    al = alpha(i)
    mu = (g / (math.factorial(n) * f ** (2 * i + 2))) ** (1.0 / (2 * i))
    u = f**al * mu * np.asarray(X, dtype=float)
    m = order_X
    return mu ** (m - 1) * f ** (m * al - 1.0 / (2 * i)) * psi(i, u, m)


def interior_theta_sqrt6(f, g, X):
    """sqrt(6) g^(-1/2) f^(3/2) Psi_1(g^(1/2) f^(-1/2) X / sqrt(6)) (i = 1)."""
    r6 = math.sqrt(6.0)
    return r6 * g**-0.5 * f**1.5 * psi(1, np.sqrt(g) / np.sqrt(f) * X / r6)


def exterior_theta(f, g, X, Z, k: int, i: int = 1, order_X: int = 0):
    """(-X f + X^(2i+1) g/(2i+1)!) exp(-Xt^4), Xt = X/(1 + Z^2k)^alpha."""
    n = 2 * i + 1
    c = (1.0 + np.asarray(Z, dtype=float) ** (2 * k)) ** (-4.0 * alpha(i))
    return _poly_times_gauss_derivs(order_X, np.asarray(f, float), np.asarray(g, float),
                                    np.asarray(X, float), c, n, math.factorial(n))


def glued_profile_Q(f, g, X, Z, s: float, frame: SelfSimilarFrame,
                    cutoff: CutoffSpec = CutoffSpec(), order_X: int = 0):
    """Q = chi_d Theta_interior + (1 - chi_d) Theta_exterior.

    f and g are trace values sampled at the Z points (broadcastable
    against X); chi_d is evaluated at Y = e^{(k-1)s/2k} Z.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    Z = np.asarray(Z, dtype=float)
    Y = frame.y_of_z(s, Z)
    chi = np.broadcast_to(cutoff.chi_d(s, Y), np.broadcast_shapes(np.shape(Z), f.shape))
    support = chi > 0
    if np.any((f <= 0) & support) or np.any((g <= 0) & support):
        raise ProfileVanishes("f or g non-positive inside the cut-off support")
    fs = np.where(support, f, 1.0)
    gs = np.where(support, g, 1.0)
    inner = interior_theta(fs, gs, X, frame.i, order_X)
    outer = exterior_theta(f, g, X, Z, frame.k, frame.i, order_X)
    return chi * inner + (1.0 - chi) * outer


def x_tilde(X, Z, k: int, i: int = 1):
    return np.asarray(X, dtype=float) / (1.0 + np.asarray(Z, dtype=float) ** (2 * k)) ** alpha(i)


# --------------------------------------------------------------------------
# handles


_PARITY = {
    "psi_i": "odd", "psi1_closed": "odd", "f_k": "even", "hermite": None,
    "phi_X": None, "phi_Z": None, "psi_ell": None, "theta_2d": "odd-X even-Z",
    "phi_jl_2d": None, "approx_F": "even", "stable_F": "even",
    "interior_theta": "odd", "exterior_theta": "odd", "glued_Q": "odd-X even-Z",
}


@dataclass(frozen=True)
class ProfileHandle:
    """An evaluable profile: family name, parameters and derivative budget.

    Calling the handle evaluates the family at the given point(s); the
    ``order`` argument is an int for 1-D families and (order_X, order_Z)
    for 2-D ones.
    """

    family: str
    params: tuple = ()
    max_derivative: int = 3

    @property
    def p(self):
        return dict(self.params)

    @property
    def parity(self):
        return _PARITY.get(self.family)

    def __call__(self, *point, order=0):
        if np.max(order) > self.max_derivative:
            from .errors import InsufficientDerivatives

            raise InsufficientDerivatives(f"{self.family} evaluated beyond order {self.max_derivative}")
        p = self.p
        fam = self.family
        if fam == "psi_i":
            return psi(p["i"], point[0], order)
        if fam == "psi1_closed":
            if order:
                return psi(1, point[0], order)
            return psi1_closed_form(point[0])
        if fam == "f_k":
            return f_k(p["k"], p.get("a", 1.0), point[0], order)
        if fam in ("phi_X", "phi_Z", "psi_ell", "hermite"):
            return eigenfunction(fam, point[0], order, **p)
        if fam == "phi_jl_2d":
            ox, oz = _orders2(order)
            return phi_jl_2d(p["k"], p["j"], p["ell"], point[0], point[1], ox, oz)
        if fam == "theta_2d":
            ox, oz = _orders2(order)
            return theta_2d(p.get("frame", SelfSimilarFrame()), point[0], point[1], ox, oz)
        if fam == "approx_F":
            return approx_profile_F(p["k"], p.get("a", 1.0), p["s"], point[0], order)
        if fam == "stable_F":
            return stable_profile_F(p["s"], p.get("a", 0.0), point[0], order)
        raise ValueError(f"family {fam!r} is evaluated through its dedicated function")


def _orders2(order):
    if np.ndim(order) == 0:
        return int(order), 0
    return int(order[0]), int(order[1])


def handle(family: str, max_derivative: int = 3, **params) -> ProfileHandle:
    return ProfileHandle(family, tuple(sorted(params.items())), max_derivative)
