"""Fractional-order jet-bundle mechanics: Caputo calculus, fractional
polynomial algebra, Euler-Lagrange derivation and economic models."""

from fracjet.errors import (
    DomainError,
    FracJetError,
    IntegrationError,
    InversionError,
    PoleError,
    SingularMetricError,
)
from fracjet.fdesolve import Trajectory, solve_alpha_system, solve_fvf
from fracjet.fracpoly import Chart, FracPoly, frac_partial, parse_poly
from fracjet.gridops import SampledFunction, caputo_left, caputo_right
from fracjet.specfun import FracOrder, gamma_fn, mittag_leffler, ml_discount
from fracjet.variational import (
    LagrangianSpec,
    derive_constrained_el,
    derive_el,
    derive_el_discounted,
    legendre,
)

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "DomainError",
    "FracJetError",
    "FracOrder",
    "FracPoly",
    "IntegrationError",
    "InversionError",
    "LagrangianSpec",
    "PoleError",
    "SampledFunction",
    "SingularMetricError",
    "Trajectory",
    "caputo_left",
    "caputo_right",
    "derive_constrained_el",
    "derive_el",
    "derive_el_discounted",
    "frac_partial",
    "gamma_fn",
    "legendre",
    "mittag_leffler",
    "ml_discount",
    "parse_poly",
    "solve_alpha_system",
    "solve_fvf",
]
