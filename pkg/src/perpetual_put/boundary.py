"""Early-exercise boundary of the perpetual put.

The boundary rho solves a single scalar equation.  In the asset-rate
variable ``y = rE/rho`` it reads ``phi(y) = 1`` with

    phi(y) = int_0^y beta(u) / (u + r beta(u)) du,

and after substituting ``u = F(H) = sigma(H)^2 H / 2`` it becomes

    psi(H*) = int_0^H* H F'(H) / (F(H) + r H) dH = 1,   rho = rE / F(H*),

which needs no inversion of F inside the integrand.  Both forms are solved
here and can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import BudgetError, ModelInvalidError
from .merton import gamma_minus
from .numerics import DEFAULT_TOL, Tolerance, find_root_monotone, integrate
from .volatility import VolatilityModel, beta, ensure_admissible

Method = Literal["u", "h"]

# guaranteed bound on |phi - 1|; the iteration aims well below it
RESIDUAL_TOL = 1e-9
_QUAD_SHARPEN = 1e-2


@dataclass(frozen=True)
class MarketParams:
    """Strike ``E`` and interest rate ``r`` (both strictly positive)."""

    E: float = 100.0
    r: float = 0.1

    def __post_init__(self) -> None:
        for name in ("E", "r"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ModelInvalidError(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class FreeBoundarySolution:
    rho: float
    residual: float
    method: str
    iterations: int
    evaluations: int


class _Counter:
    def __init__(self) -> None:
        self.evaluations = 0


def phi(model: VolatilityModel, market: MarketParams, y: float, tol: Tolerance = DEFAULT_TOL,
        _counter: _Counter = None) -> float:
    """int_0^y beta(u) / (u + r beta(u)) du."""
    if y < 0:
        raise ValueError(f"phi is defined for y >= 0, got {y}")
    r = market.r

    def integrand(u):
        b = beta(model, u, tol)
        return b / (u + r * b)

    res = integrate(integrand, 0.0, y, tol)
    if _counter is not None:
        _counter.evaluations += res.evaluations
    return res.value


def psi(model: VolatilityModel, market: MarketParams, H_star: float, tol: Tolerance = DEFAULT_TOL,
        _counter: _Counter = None) -> float:
    """int_0^H* H F'(H) / (F(H) + r H) dH, the H-variable form of ``phi(F(H*))``."""
    r = market.r

    def integrand(H):
        return H * model._dforward(H) / (model._forward(H) + r * H)

    res = integrate(integrand, 0.0, H_star, tol)
    if _counter is not None:
        _counter.evaluations += res.evaluations
    return res.value


def _quad_tol(tol: Tolerance) -> Tolerance:
    return tol.scaled(_QUAD_SHARPEN)


def _root_tol(tol: Tolerance) -> Tolerance:
    return Tolerance(min(RESIDUAL_TOL, 10 * tol.abs_tol * _QUAD_SHARPEN), 1e-13, tol.max_iter)


def solve_rho_u(model: VolatilityModel, market: MarketParams, tol: Tolerance = DEFAULT_TOL) -> FreeBoundarySolution:
    """Boundary from ``phi(rE/rho) = 1``.

    The lower end of the search bracket is ``rE / rho_{gamma-}`` (phi cannot
    reach one before it because beta <= 2u/sigma(0)^2); the upper end is
    doubled until phi exceeds one.
    """
    ensure_admissible(model)
    E, r = market.E, market.r
    counter = _Counter()
    g_minus = gamma_minus(model, r)
    y_lo = r * (1.0 + g_minus) / g_minus

    def g(y: float) -> float:
        return phi(model, market, y, _quad_tol(tol), counter) - 1.0

    g_lo = g(y_lo)
    if abs(g_lo) <= _root_tol(tol).abs_tol:
        return FreeBoundarySolution(r * E / y_lo, g_lo, "u", 0, counter.evaluations)
    y_hi, g_hi = y_lo, g_lo
    for _ in range(200):
        if g_hi >= 0:
            break
        y_lo, g_lo = y_hi, g_hi
        y_hi *= 2.0
        g_hi = g(y_hi)
    else:
        raise BudgetError("could not bracket the boundary equation")

    y, info = find_root_monotone(g, y_lo, y_hi, _root_tol(tol), g_lo=g_lo, g_hi=g_hi, full_output=True)
    residual = g(y)
    return _solution(r * E / y, residual, "u", info.iterations, counter.evaluations, E)


def solve_rho_h(model: VolatilityModel, market: MarketParams, tol: Tolerance = DEFAULT_TOL) -> FreeBoundarySolution:
    """Boundary from the H-variable equation ``psi(H*) = 1``, then ``rho = rE / F(H*)``.

    ``psi(H) >= H / (1 + gamma_minus)``, so ``H* <= 1 + gamma_minus``; for Frey
    the bracket is additionally capped just below 1/mu.
    """
    ensure_admissible(model)
    E, r = market.E, market.r
    counter = _Counter()
    H_hi = (1.0 + gamma_minus(model, r)) * (1.0 + 1e-9)

    def g(H: float) -> float:
        return psi(model, market, H, _quad_tol(tol), counter) - 1.0

    H_lo, g_lo = 0.0, -1.0
    if H_hi >= model.h_max:
        # walk towards the pole, h_max (1 - 2^-k), until psi passes one
        for k in range(1, 45):
            H_hi = model.h_max * (1.0 - 2.0**-k)
            g_hi = g(H_hi)
            if g_hi >= 0:
                break
            H_lo, g_lo = H_hi, g_hi
        else:
            raise BudgetError(f"{model.name}: boundary equation not bracketed below h_max")
    else:
        g_hi = g(H_hi)

    H_star, info = find_root_monotone(g, H_lo, H_hi, _root_tol(tol), g_lo=g_lo, g_hi=g_hi, full_output=True)
    residual = g(H_star)
    y = float(model._forward(np.array([H_star]))[0])
    return _solution(r * E / y, residual, "h", info.iterations, counter.evaluations, E)


def _solution(rho, residual, method, iterations, evaluations, E) -> FreeBoundarySolution:
    if not 0.0 < rho < E:
        raise BudgetError(f"boundary {rho!r} outside (0, E); solver failed")
    return FreeBoundarySolution(float(rho), float(residual), method, iterations, evaluations)


def solve_rho(model: VolatilityModel, market: MarketParams, tol: Tolerance = DEFAULT_TOL,
              method: Method = "h") -> FreeBoundarySolution:
    if method == "u":
        return solve_rho_u(model, market, tol)
    if method == "h":
        return solve_rho_h(model, market, tol)
    raise ValueError(f"unknown method {method!r}; use 'u' or 'h'")
