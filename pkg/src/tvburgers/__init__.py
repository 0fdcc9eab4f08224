"""Self-similar blow-up for Burgers with transverse viscosity, numerically.

Modules: ``numerics`` (root finding, tridiagonal solves, quadrature,
stencils), ``profiles`` (closed-form profiles and eigenfunctions),
``dss`` (discretely self-similar profiles), ``spectral`` (eigen residuals,
weighted norms, sampled bounds), ``burgers1d`` (shock formation by
characteristics), ``parabolic1d`` (the (f, g) trace system),
``burgers2d`` (the renormalized 2-D run) and ``cli``.
"""
__version__ = "0.1.0"

from .errors import TvBurgersError  # noqa: E402,F401
