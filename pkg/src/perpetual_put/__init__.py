"""Perpetual American put pricing under nonlinear Black-Scholes volatility.

The early-exercise boundary comes from a single scalar integral equation and
the price from a one-dimensional ODE/quadrature representation, for any
volatility ``sigma(H)`` of ``H = S V''`` that is non-decreasing with
``sigma(0) > 0``.
"""

from .boundary import FreeBoundarySolution, MarketParams, phi, psi, solve_rho, solve_rho_h, solve_rho_u
from .errors import (
    BudgetError,
    DomainError,
    GridTooCoarseError,
    ModelInvalidError,
    NoBracketError,
    NonFiniteError,
    PerpetualPutError,
    UnsupportedFamilyError,
)
from .merton import BoundsReport, MertonSolution, check_bounds, envelopes, gamma_minus, gamma_plus, merton_value
from .numerics import DEFAULT_TOL, Tolerance, find_root_monotone, integrate, solve_ivp
from .pricer import (
    G,
    PriceCurve,
    TransformedState,
    U_of_x_ode,
    U_of_x_root,
    boundary_slope,
    pde_residual,
    price,
    price_curve,
    price_h,
)
from .sensitivity import SensitivityExpansion, expansion, linear_approx, validate_expansion
from .volatility import (
    MODELS,
    RAPM,
    AmsterLinear,
    BaksteinHowison,
    Constant,
    Frey,
    ModifiedFrey,
    PowerLaw,
    VolatilityModel,
    beta,
    forward,
    forward_derivative,
    model_from_config,
    sigma_squared,
    validate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
