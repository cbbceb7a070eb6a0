"""Constant-volatility perpetual put (Merton) and the sub/super-solution envelopes.

For a non-decreasing volatility the nonlinear price is squeezed between two
Merton prices: the one with exponent ``gamma_minus = 2r / sigma(0)^2``
(lower envelope) and the one with ``gamma_plus`` solving
``gamma * sigma(1 + gamma)^2 = 2r`` (upper envelope).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DomainError, NoBracketError
from .numerics import DEFAULT_TOL, Tolerance, find_root_monotone
from .volatility import VolatilityModel

GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class MertonSolution:
    """Closed-form perpetual put for the exponent ``gamma = 2r / sigma^2``."""

    gamma: float
    E: float

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and self.E > 0):
            raise DomainError(f"need gamma > 0 and E > 0, got gamma={self.gamma}, E={self.E}")

    @classmethod
    def from_volatility(cls, sigma0: float, E: float, r: float) -> "MertonSolution":
        return cls(2.0 * r / sigma0**2, E)

    @property
    def rho_gamma(self) -> float:
        return self.E * self.gamma / (1.0 + self.gamma)

    def sigma0(self, r: float) -> float:
        return math.sqrt(2.0 * r / self.gamma)

    def value(self, S):
        return merton_value(self, S)


def merton_value(sol: MertonSolution, S):
    """``E/(1+gamma) (S/rho)^-gamma`` above the boundary, ``E - S`` below it."""
    S_arr = np.asarray(S, dtype=float)
    if np.any(S_arr <= 0):
        raise DomainError("asset price must be positive")
    rho = sol.rho_gamma
    with np.errstate(over="ignore", divide="ignore"):
        cont = sol.E / (1.0 + sol.gamma) * (S_arr / rho) ** (-sol.gamma)
    out = np.where(S_arr > rho, cont, sol.E - S_arr)
    return float(out) if out.ndim == 0 else out


def gamma_minus(model: VolatilityModel, r: float) -> float:
    """Exponent of the lower envelope, 2r / sigma(0)^2."""
    s0 = model.variance_at_zero
    if s0 <= 0:
        raise DomainError(f"sigma(0)^2 = {s0} must be positive")
    return 2.0 * r / s0


def gamma_plus(model: VolatilityModel, r: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """Exponent of the upper envelope: the root of ``gamma * sigma(1+gamma)^2 = 2r`` in (0, gamma_minus].

    For Frey, ``sigma(1+gamma)`` only exists while ``1 + gamma < 1/mu``;
    when that leaves no room for a root, :class:`NoBracketError` is raised.
    """
    g_minus = gamma_minus(model, r)
    if model.is_constant:
        return g_minus
    hi = g_minus
    if math.isfinite(model.h_max):
        edge = (model.h_max - 1.0) * (1.0 - 1e-14)
        if edge <= GAMMA_FLOOR:
            raise NoBracketError(
                f"{model.name}: sigma(1 + gamma) undefined for every gamma > 0 (h_max = {model.h_max})"
            )
        hi = min(hi, edge)

    def g(gam: float) -> float:
        return gam * float(model._sigma2(np.array([1.0 + gam]))[0]) - 2.0 * r

    g_hi = g(hi)
    if g_hi == 0.0:
        return hi
    return find_root_monotone(g, GAMMA_FLOOR, hi, tol, g_hi=g_hi)


@dataclass
class BoundsReport:
    """Outcome of the envelope comparison; margins are signed (negative means violated)."""

    passed: bool
    rho: float
    rho_lower: Optional[float]
    rho_upper: float
    gamma_plus: Optional[float]
    gamma_minus: float
    worst_lower_margin: float
    worst_upper_margin: Optional[float]
    messages: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def envelopes(model: VolatilityModel, E: float, r: float, tol: Tolerance = DEFAULT_TOL):
    """Return ``(lower, upper)`` Merton solutions; ``upper`` is None when gamma_plus does not exist."""
    lower = MertonSolution(gamma_minus(model, r), E)
    try:
        upper = MertonSolution(gamma_plus(model, r, tol), E)
    except NoBracketError:
        upper = None
    return lower, upper


def check_bounds(model: VolatilityModel, market, curve, tol: float = 1e-6) -> BoundsReport:
    """Compare a computed price curve against the Merton envelopes.

    Checks ``V_{gamma-}(S) - tol <= V(S) <= V_{gamma+}(S) + tol`` at every
    grid point and ``rho_{gamma+} - tol <= rho <= rho_{gamma-} + tol``.  ``tol``
    is an absolute slack in currency units.
    """
    lower, upper = envelopes(model, market.E, market.r)
    S = np.asarray(curve.S, dtype=float)
    V = np.asarray(curve.V, dtype=float)
    messages: List[str] = []

    lo_margin = float(np.min(V - merton_value(lower, S))) if S.size else math.inf
    rho_hi_margin = lower.rho_gamma - curve.rho
    ok = lo_margin >= -tol and rho_hi_margin >= -tol
    if lo_margin < -tol:
        messages.append(f"V falls below the lower envelope by {-lo_margin:.3e}")
    if rho_hi_margin < -tol:
        messages.append(f"rho exceeds rho_gamma- by {-rho_hi_margin:.3e}")

    up_margin = None
    rho_lower = None
    if upper is None:
        messages.append("upper envelope unavailable: sigma(1 + gamma) undefined on the admissible range")
    else:
        rho_lower = upper.rho_gamma
        up_margin = float(np.min(merton_value(upper, S) - V)) if S.size else math.inf
        rho_lo_margin = curve.rho - upper.rho_gamma
        if up_margin < -tol:
            ok = False
            messages.append(f"V exceeds the upper envelope by {-up_margin:.3e}")
        if rho_lo_margin < -tol:
            ok = False
            messages.append(f"rho is below rho_gamma+ by {-rho_lo_margin:.3e}")

    return BoundsReport(
        passed=ok,
        rho=curve.rho,
        rho_lower=rho_lower,
        rho_upper=lower.rho_gamma,
        gamma_plus=None if upper is None else upper.gamma,
        gamma_minus=lower.gamma,
        worst_lower_margin=lo_margin,
        worst_upper_margin=up_margin,
        messages=messages,
    )
