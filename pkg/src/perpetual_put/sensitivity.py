"""First-order behaviour of the exercise boundary in the model parameter.

If ``sigma(H)^2 H / 2 = sigma0^2 (1 + mu H^a) H / 2 + O(mu^2)`` then

    rho(mu) = E gamma/(1+gamma) - mu E/(a+1) gamma (1+gamma)^(a-2) + O(mu^2),

with ``gamma = 2r / sigma0^2``.  Each supported family is mapped onto this
normal form through an exponent ``a`` and a factor ``mu_scale`` relating its
own parameter to ``mu`` above (Frey's ``(1 - mu H)^-2`` expands to
``1 + 2 mu H``, hence ``mu_scale = 2``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .boundary import MarketParams, solve_rho
from .errors import UnsupportedFamilyError
from .numerics import DEFAULT_TOL, Tolerance
from .volatility import RAPM, AmsterLinear, Frey, ModifiedFrey, PowerLaw, VolatilityModel

# family -> (a, mu_scale); power-law takes its exponent from the caller
_NORMAL_FORM: Dict[str, tuple] = {
    "rapm": (1.0 / 3.0, 1.0),
    "frey": (1.0, 2.0),
    "modified-frey": (1.0, 2.0),
    "amster": (1.0, 1.0),
    "power-law": (None, 1.0),
}

SUPPORTED_FAMILIES = tuple(_NORMAL_FORM)


@dataclass(frozen=True)
class SensitivityExpansion:
    """``rho(mu) ~ rho0 + mu * drho_dmu`` in the family's native parameter."""

    rho0: float
    drho_dmu: float
    a: float
    mu_scale: float
    family: str = ""


def _normal_form(family: str, a: Optional[float]):
    key = family.strip().lower()
    if key not in _NORMAL_FORM:
        raise UnsupportedFamilyError(
            f"no first-order expansion for {family!r}; supported: {', '.join(SUPPORTED_FAMILIES)}"
        )
    a_fam, scale = _NORMAL_FORM[key]
    if a_fam is None:
        a_fam = 1.0 if a is None else float(a)
        if a_fam < 0:
            raise UnsupportedFamilyError(f"power-law exponent must be >= 0, got {a_fam}")
    elif a is not None and abs(a - a_fam) > 1e-12:
        raise UnsupportedFamilyError(f"{key} has exponent a = {a_fam:g}; got a = {a}")
    return key, a_fam, scale


def family_model(family: str, sigma0: float, mu: float, a: Optional[float] = None) -> VolatilityModel:
    """Member of a supported family at parameter ``mu``."""
    key, a_fam, _ = _normal_form(family, a)
    if key == "rapm":
        return RAPM(sigma0, mu)
    if key == "frey":
        return Frey(sigma0, mu)
    if key == "modified-frey":
        return ModifiedFrey(sigma0, mu)
    if key == "amster":
        return AmsterLinear(sigma0, Le=0.0, kappa=mu)
    return PowerLaw(sigma0, mu, a_fam)


def expansion(family: str, sigma0: float, market: MarketParams, a: Optional[float] = None) -> SensitivityExpansion:
    key, a_fam, scale = _normal_form(family, a)
    E = market.E
    gamma = 2.0 * market.r / sigma0**2
    rho0 = E * gamma / (1.0 + gamma)
    slope = -E / (a_fam + 1.0) * gamma * (1.0 + gamma) ** (a_fam - 2.0) * scale
    return SensitivityExpansion(rho0, slope, a_fam, scale, key)


def linear_approx(exp: SensitivityExpansion, mu: float) -> float:
    return exp.rho0 + mu * exp.drho_dmu


def constant_shift_rho(sigma0: float, market: MarketParams, mu: float) -> float:
    """Exact boundary for ``sigma^2 = sigma0^2 (1 + mu)``, the ``a = 0`` member."""
    return market.E / (1.0 + sigma0**2 * (1.0 + mu) / (2.0 * market.r))


@dataclass
class ExpansionRow:
    h: float
    rho: float
    linear: float
    gap: float
    slope: float
    extrapolated: float


@dataclass
class ExpansionReport:
    expansion: SensitivityExpansion
    rows: List[ExpansionRow] = field(default_factory=list)
    observed_slope: float = float("nan")
    slope_error: float = float("nan")
    bound: float = float("nan")
    passed: bool = False


def validate_expansion(family: str, sigma0: float, market: MarketParams, h_list: Sequence[float],
                       a: Optional[float] = None, tol: Tolerance = DEFAULT_TOL,
                       C: float = 1e3) -> ExpansionReport:
    """Compare the predicted slope with finite differences of the exact boundary.

    For each ``h`` the forward quotient ``s(h) = (rho(h) - rho(0)) / h`` and its
    Richardson value ``2 s(h/2) - s(h)`` are formed (negative parameters are not
    admissible, so central differences are unavailable).  The check passes when
    the extrapolated slope at the smallest ``h`` is within ``C h`` of the
    prediction.
    """
    exp = expansion(family, sigma0, market, a)
    hs = sorted(float(h) for h in h_list)
    report = ExpansionReport(exp)
    if not hs:
        return report
    if hs[0] <= 0:
        raise ValueError("finite-difference steps must be positive")

    cache: Dict[float, float] = {}

    def rho_at(mu: float) -> float:
        if mu not in cache:
            cache[mu] = solve_rho(family_model(family, sigma0, mu, exp.a), market, tol).rho
        return cache[mu]

    rho0 = rho_at(0.0)
    for h in hs:
        rho_h = rho_at(h)
        s_full = (rho_h - rho0) / h
        s_half = (rho_at(0.5 * h) - rho0) / (0.5 * h)
        lin = linear_approx(exp, h)
        report.rows.append(ExpansionRow(h, rho_h, lin, rho_h - lin, s_full, 2.0 * s_half - s_full))
    best = report.rows[0]
    report.observed_slope = best.extrapolated
    report.slope_error = abs(best.extrapolated - exp.drho_dmu)
    report.bound = C * best.h
    report.passed = report.slope_error <= report.bound
    return report


def sweep(family: str, sigma0: float, market: MarketParams, mus: Sequence[float],
          a: Optional[float] = None, tol: Tolerance = DEFAULT_TOL) -> List[Dict[str, float]]:
    """Exact and linearised boundary over a parameter grid."""
    exp = expansion(family, sigma0, market, a)
    rows = []
    for mu in mus:
        exact = solve_rho(family_model(family, sigma0, mu, exp.a), market, tol).rho
        lin = linear_approx(exp, mu)
        rows.append({"mu": float(mu), "rho_exact": exact, "rho_linear": lin, "gap": exact - lin})
    return rows


__all__ = [
    "SensitivityExpansion", "ExpansionRow", "ExpansionReport", "SUPPORTED_FAMILIES",
    "family_model", "expansion", "linear_approx", "constant_shift_rho",
    "validate_expansion", "sweep",
]
