"""Price of the perpetual put above the exercise boundary.

With ``x = ln S`` the rate ``U(x) = rV/S - r dV/dS`` obeys the autonomous ODE

    U' = -U - r beta(U),    U(ln rho) = rE / rho,

and the price follows from it through

    V(S) = (S/r) K(U(ln S)),    K(U) = int_0^U u / (u + r beta(u)) du.

``U`` can be obtained either by marching the ODE (cheap for whole curves) or
by inverting ``G(U) = int_{U0}^U du / (u + r beta(u))``, since
``G(U(x)) = -(x - x0)``.  The H-variable formulas (``u = F(H)``) give an
independent route that avoids inverting ``F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .boundary import MarketParams, solve_rho
from .errors import DomainError, GridTooCoarseError
from .merton import gamma_minus
from .numerics import DEFAULT_TOL, Tolerance, find_root_monotone, integrate, solve_ivp
from .volatility import VolatilityModel, beta, ensure_admissible

# relative spacing above which finite differences are refused
MAX_REL_SPACING = 1e-2


@dataclass(frozen=True)
class TransformedState:
    """One point ``(x, U)`` of the transformed problem, ``x = ln S``."""

    x: float
    U: float

    @property
    def S(self) -> float:
        return math.exp(self.x)


@dataclass(frozen=True)
class PriceCurve:
    """Prices on an increasing grid of asset prices.

    ``U`` and ``H = beta(U) = S V''`` are reported alongside ``V``; in the
    exercise region ``S < rho`` they take their intrinsic values ``rE/S``
    and ``0`` (at ``S = rho`` the continuation-side ``H`` is reported).
    """

    S: np.ndarray
    V: np.ndarray
    U: np.ndarray
    H: np.ndarray
    rho: float
    model: VolatilityModel
    market: MarketParams = field(default_factory=MarketParams)

    def __post_init__(self) -> None:
        for name in ("S", "V", "U", "H"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.S.size

    @property
    def intrinsic(self) -> np.ndarray:
        return np.maximum(self.market.E - self.S, 0.0)


def _split(tol: Tolerance):
    # half of the budget for locating U, half for the outer integral; the
    # absolute part is dropped because V = (S/r) K amplifies absolute errors
    inner = Tolerance(1e-300, 0.5 * tol.rel_tol, max(tol.max_iter, 400))
    return inner, inner


def _resolve_rho(model, market, rho, tol) -> float:
    if rho is None:
        return solve_rho(model, market, tol).rho
    if not 0.0 < rho < market.E:
        raise DomainError(f"rho must lie in (0, E), got {rho!r}")
    return float(rho)


def _log_integrand(model, r, tol):
    # u/(u + r beta(u)) as a function of s = ln u; bounded, so log-space
    # quadrature handles U -> 0 without a 1/u singularity
    def f(s):
        u = np.exp(s)
        b = beta(model, u, tol)
        return u / (u + r * b)

    return f


def G(model: VolatilityModel, market: MarketParams, rho: float, U: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """``int_{rE/rho}^U du / (u + r beta(u))``; negative for ``U < rE/rho``."""
    if not U > 0:
        raise DomainError(f"G is defined for U > 0, got {U!r}")
    U0 = market.r * market.E / rho
    s0, s1 = math.log(U0), math.log(U)
    f = _log_integrand(model, market.r, tol)
    quad_tol = Tolerance(1e-300, tol.rel_tol, max(tol.max_iter, 400))
    if s1 >= s0:
        return integrate(f, s0, s1, quad_tol).value
    return -integrate(f, s1, s0, quad_tol).value


def U_of_x_ode(model: VolatilityModel, market: MarketParams, rho: float, x_end: float,
               tol: Tolerance = DEFAULT_TOL, x_eval: Optional[Sequence[float]] = None) -> List[TransformedState]:
    """March ``U' = -U - r beta(U)`` from ``ln rho`` to ``x_end``.

    Returns the accepted steps, or the states at ``x_eval`` when given.
    """
    x, U = _march(model, market, rho, x_end, tol, x_eval)
    return [TransformedState(float(a), float(b)) for a, b in zip(x, U)]


def _march(model, market, rho, x_end, tol, x_eval=None):
    x0 = math.log(rho)
    if x_end < x0:
        raise DomainError(f"x_end={x_end} lies below ln(rho)={x0}")
    r = market.r
    beta_tol = DEFAULT_TOL

    def rhs(_x, U):
        if U <= 0.0:
            return -U
        return -U - r * beta(model, U, beta_tol)

    ode_tol = Tolerance(1e-300, 0.5 * tol.rel_tol, tol.max_iter)
    return solve_ivp(rhs, x0, r * market.E / rho, x_end, ode_tol, x_eval=x_eval)


def U_of_x_root(model: VolatilityModel, market: MarketParams, rho: float, x: float,
                tol: Tolerance = DEFAULT_TOL) -> float:
    """Invert ``G(U) = -(x - ln rho)`` for ``U``.

    The integrand of ``G`` in ``ln u`` is at least ``1/(1 + gamma_minus)``, so
    ``ln U`` lies within ``(1 + gamma_minus)(x - x0)`` below ``ln U0``.
    """
    x0 = math.log(rho)
    dx = x - x0
    if dx < 0:
        raise DomainError(f"x={x} lies below ln(rho)={x0}")
    U0 = market.r * market.E / rho
    if dx == 0:
        return U0
    s0 = math.log(U0)
    f = _log_integrand(model, market.r, DEFAULT_TOL)
    quad_tol = Tolerance(1e-300, 1e-2 * tol.rel_tol, max(tol.max_iter, 400))

    def g(s):
        return -integrate(f, s, s0, quad_tol).value + dx

    lo = s0 - (1.0 + gamma_minus(model, market.r)) * dx * (1.0 + 1e-12)
    root_tol = Tolerance(max(1e-300, 1e-2 * tol.rel_tol * dx), 1e-15, tol.max_iter)
    s = find_root_monotone(g, lo, s0, root_tol, g_hi=dx)
    return math.exp(s)


def _K(model, r, U_lo, U_hi, tol):
    def f(u):
        b = beta(model, u, DEFAULT_TOL)
        return u / (u + r * b)

    return integrate(f, U_lo, U_hi, tol).value


def price(model: VolatilityModel, market: MarketParams, rho: Optional[float] = None,
          S: Optional[float] = None, tol: Tolerance = DEFAULT_TOL) -> float:
    """Option value at a single asset price (``S`` defaults to the strike).

    Intrinsic ``E - S`` for ``S <= rho``; above the boundary ``U`` is found by
    inverting ``G`` and ``V = (S/r) K(U)``.
    """
    S = market.E if S is None else float(S)
    if not S > 0:
        raise DomainError(f"asset price must be positive, got {S!r}")
    ensure_admissible(model)
    rho = _resolve_rho(model, market, rho, tol)
    if S <= rho:
        return market.E - S
    u_tol, k_tol = _split(tol)
    U = U_of_x_root(model, market, rho, math.log(S), u_tol)
    return S / market.r * _K(model, market.r, 0.0, U, k_tol)


def price_h(model: VolatilityModel, market: MarketParams, rho: Optional[float] = None,
            S: Optional[float] = None, tol: Tolerance = DEFAULT_TOL) -> float:
    """Option value through the H variable only (no inversion of F).

    ``H_S = S V''(S)`` solves ``int_{H_S}^{H*} F'/(F + rH) dH = ln(S/rho)``
    with ``F(H*) = rE/rho``, and ``V = (S/r) int_0^{H_S} F F'/(F + rH) dH``.
    """
    S = market.E if S is None else float(S)
    if not S > 0:
        raise DomainError(f"asset price must be positive, got {S!r}")
    ensure_admissible(model)
    rho = _resolve_rho(model, market, rho, tol)
    if S <= rho:
        return market.E - S
    r = market.r
    u_tol, k_tol = _split(tol)
    H_star = float(beta(model, r * market.E / rho))
    t0 = math.log(H_star)
    dx = math.log(S / rho)

    def f_log(t):
        H = np.exp(t)
        return H * model._dforward(H) / (model._forward(H) + r * H)

    quad_tol = Tolerance(1e-300, 1e-2 * u_tol.rel_tol, u_tol.max_iter)

    def g(t):
        return -integrate(f_log, t, t0, quad_tol).value + dx

    lo = t0 - (1.0 + gamma_minus(model, r)) * dx * (1.0 + 1e-12)
    root_tol = Tolerance(max(1e-300, 1e-2 * u_tol.rel_tol * dx), 1e-15, u_tol.max_iter)
    H_S = math.exp(find_root_monotone(g, lo, t0, root_tol, g_hi=dx))

    def f_k(H):
        F = model._forward(H)
        return F * model._dforward(H) / (F + r * H)

    return S / r * integrate(f_k, 0.0, H_S, k_tol).value


def price_curve(model: VolatilityModel, market: MarketParams, S_grid: Sequence[float],
                tol: Tolerance = DEFAULT_TOL, rho: Optional[float] = None) -> PriceCurve:
    """Prices on an increasing grid from a single ODE march.

    ``K`` is accumulated panel by panel between consecutive values of ``U``,
    so the whole curve costs one march plus one short quadrature per point.
    """
    S = np.asarray(S_grid, dtype=float)
    if S.ndim != 1:
        raise DomainError("S_grid must be one-dimensional")
    if np.any(S <= 0) or np.any(np.diff(S) <= 0):
        raise DomainError("S_grid must be positive and strictly increasing")
    ensure_admissible(model)
    rho = _resolve_rho(model, market, rho, tol)
    E, r = market.E, market.r
    u_tol, k_tol = _split(tol)

    V = E - S
    U = r * E / S
    H = np.zeros_like(S)
    cont = S >= rho
    if np.any(cont):
        xs = np.log(S[cont])
        _, Uc = _march(model, market, rho, float(xs[-1]), u_tol, x_eval=xs)
        Hc = np.atleast_1d(beta(model, Uc))
        # U decreases along the grid: integrate K upwards from the far end
        Kc = np.empty_like(Uc)
        acc = _K(model, r, 0.0, Uc[-1], k_tol)
        Kc[-1] = acc
        for j in range(Uc.size - 2, -1, -1):
            acc += _K(model, r, Uc[j + 1], Uc[j], k_tol)
            Kc[j] = acc
        V[cont] = S[cont] / r * Kc
        U[cont] = Uc
        H[cont] = Hc
        # value matching holds exactly, not just to quadrature accuracy
        V[S == rho] = E - rho
    return PriceCurve(S, V, U, H, rho, model, market)


def pde_residual(model: VolatilityModel, market: MarketParams, curve: PriceCurve, i: int) -> float:
    """``sigma(S V'')^2 S^2 V''/2 + r S V' - r V`` at grid index ``i``.

    Derivatives are three-point central differences on the (possibly
    non-uniform) grid.  The stencil must lie inside the continuation region and
    neighbouring points must be closer than 1% of ``S``.
    """
    S, V = curve.S, curve.V
    n = S.size
    if not 0 < i < n - 1:
        raise GridTooCoarseError(f"index {i} has no two-sided stencil on a grid of {n} points")
    if S[i - 1] < curve.rho:
        raise DomainError(f"stencil at S={S[i]:.6g} reaches into the exercise region S < {curve.rho:.6g}")
    h1, h2 = S[i] - S[i - 1], S[i + 1] - S[i]
    if max(h1, h2) > MAX_REL_SPACING * S[i]:
        raise GridTooCoarseError(
            f"grid spacing {max(h1, h2):.3g} at S={S[i]:.6g} exceeds {MAX_REL_SPACING:g} S"
        )
    dV = (-h2 / (h1 * (h1 + h2)) * V[i - 1] + (h2 - h1) / (h1 * h2) * V[i]
          + h1 / (h2 * (h1 + h2)) * V[i + 1])
    d2V = 2.0 * (h2 * V[i - 1] - (h1 + h2) * V[i] + h1 * V[i + 1]) / (h1 * h2 * (h1 + h2))
    Hi = S[i] * d2V
    s2 = float(model._sigma2(np.array([max(Hi, 0.0)]))[0])
    r = market.r
    return 0.5 * s2 * S[i] ** 2 * d2V + r * S[i] * dV - r * V[i]


def boundary_slope(curve: PriceCurve, order: int = 2) -> float:
    """One-sided difference quotient of ``V`` at the first grid point.

    ``order=1`` is the plain forward quotient; ``order=2`` uses three points,
    which removes the ``h V''/2`` bias of the former.  The grid is expected to
    start at ``rho``, where smooth pasting predicts ``-1``.
    """
    S, V = curve.S, curve.V
    if order == 1:
        return float((V[1] - V[0]) / (S[1] - S[0]))
    if order != 2:
        raise ValueError("order must be 1 or 2")
    h1, h2 = S[1] - S[0], S[2] - S[1]
    return float(-(2 * h1 + h2) / (h1 * (h1 + h2)) * V[0] + (h1 + h2) / (h1 * h2) * V[1]
                 - h1 / (h2 * (h1 + h2)) * V[2])


__all__ = [
    "TransformedState", "PriceCurve", "G", "U_of_x_ode", "U_of_x_root", "price",
    "price_h", "price_curve", "pde_residual", "boundary_slope",
]
