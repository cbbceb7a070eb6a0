"""Volatility functions sigma(H)^2 of the argument H = S * d2V/dS2.

Every model exposes the forward map ``u = sigma(H)^2 H / 2``, its
H-derivative, and (through :func:`beta`) the inverse of the forward map.
Only the convex branch H >= 0 is modelled, which is the branch a put price
lives on; sign-dependent terms (Leland-type ``sgn(H)``) are therefore frozen
at ``sgn = +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Dict, List, Mapping, Union

import numpy as np

from .errors import BudgetError, DomainError, ModelInvalidError
from .numerics import DEFAULT_TOL, Tolerance

ArrayLike = Union[float, np.ndarray]

_EPS = np.finfo(float).eps
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
FREY_EDGE = 1e-14


def _check_nonneg(name: str, value: float) -> None:
    if not (math.isfinite(value) and value >= 0):
        raise ModelInvalidError(f"{name} must be a finite number >= 0, got {value!r}")


@dataclass(frozen=True)
class VolatilityModel:
    """Base class; concrete variants implement :meth:`_sigma2`, :meth:`_forward` and :meth:`_dforward`."""

    sigma0: float

    name = "base"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ModelInvalidError(f"sigma0 must be positive, got {self.sigma0!r}")

    @property
    def h_max(self) -> float:
        """Supremum of the admissible H range (open at the right)."""
        return math.inf

    @cached_property
    def variance_at_zero(self) -> float:
        """sigma(0)^2."""
        return float(self._sigma2(np.zeros(1))[0])

    @property
    def is_constant(self) -> bool:
        return False

    def _check(self, H: ArrayLike) -> np.ndarray:
        H = np.asarray(H, dtype=float)
        if np.any(H < 0) or np.any(np.isnan(H)):
            raise DomainError(f"{self.name}: H must be >= 0")
        if np.any(H >= self.h_max):
            raise DomainError(f"{self.name}: H must stay below h_max={self.h_max}")
        return H

    def sigma_squared(self, H: ArrayLike) -> ArrayLike:
        H = self._check(H)
        return _shape_like(self._sigma2(np.atleast_1d(H)), H)

    def forward(self, H: ArrayLike) -> ArrayLike:
        H = self._check(H)
        return _shape_like(self._forward(np.atleast_1d(H)), H)

    def forward_derivative(self, H: ArrayLike) -> ArrayLike:
        H = self._check(H)
        return _shape_like(self._dforward(np.atleast_1d(H)), H)

    # default forward built from sigma^2; variants override with closed forms
    def _forward(self, H: np.ndarray) -> np.ndarray:
        return 0.5 * self._sigma2(H) * H

    def _sigma2(self, H: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _dforward(self, H: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_config(self) -> Dict[str, object]:
        cfg: Dict[str, object] = {"model": self.name}
        for f in fields(self):
            cfg[_CONFIG_KEY_OUT.get(f.name, f.name)] = getattr(self, f.name)
        return cfg


def _shape_like(values: np.ndarray, H: np.ndarray) -> ArrayLike:
    return float(values[0]) if H.ndim == 0 else values


@dataclass(frozen=True)
class Constant(VolatilityModel):
    name = "constant"

    @property
    def is_constant(self) -> bool:
        return True

    def _sigma2(self, H):
        return np.full_like(H, self.sigma0**2)

    def _dforward(self, H):
        return np.full_like(H, 0.5 * self.sigma0**2)


@dataclass(frozen=True)
class Frey(VolatilityModel):
    """Large-trader feedback: sigma^2 = sigma0^2 (1 - mu H)^-2 on 0 <= H < 1/mu."""

    mu: float = 0.0
    name = "frey"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("mu", self.mu)

    @property
    def h_max(self) -> float:
        return 1.0 / self.mu if self.mu > 0 else math.inf

    def _sigma2(self, H):
        return self.sigma0**2 / (1.0 - self.mu * H) ** 2

    def _dforward(self, H):
        z = self.mu * H
        return 0.5 * self.sigma0**2 * (1.0 + z) / (1.0 - z) ** 3


@dataclass(frozen=True)
class ModifiedFrey(VolatilityModel):
    """Frey volatility with (1 - mu H)^-1 replaced by its degree-N Taylor polynomial."""

    mu: float = 0.0
    N: int = 10
    name = "modified-frey"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("mu", self.mu)
        if int(self.N) != self.N or self.N < 1:
            raise ModelInvalidError(f"N must be a positive integer, got {self.N!r}")

    def _series(self, H):
        # p = sum_{n=1}^N (mu H)^n, q = sum_{n=1}^N n (mu H)^n, both by Horner
        z = self.mu * H
        p = 0.0 * z
        q = 0.0 * z
        for n in range(int(self.N), 0, -1):
            p = (p + 1.0) * z
            q = (q + n) * z
        return p, q

    def _sigma2(self, H):
        p, _ = self._series(H)
        return self.sigma0**2 * (1.0 + p) ** 2

    def _dforward(self, H):
        p, q = self._series(H)
        return 0.5 * self.sigma0**2 * (1.0 + p) * (1.0 + p + 2.0 * q)


@dataclass(frozen=True)
class RAPM(VolatilityModel):
    """Risk adjusted pricing methodology: sigma^2 = sigma0^2 (1 + mu H^(1/3))."""

    mu: float = 0.0
    name = "rapm"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("mu", self.mu)

    def _sigma2(self, H):
        return self.sigma0**2 * (1.0 + self.mu * np.cbrt(H))

    def _dforward(self, H):
        return 0.5 * self.sigma0**2 * (1.0 + (4.0 / 3.0) * self.mu * np.cbrt(H))


@dataclass(frozen=True)
class PowerLaw(VolatilityModel):
    """sigma^2 = sigma0^2 (1 + mu H^a), a >= 0.

    ``a = 1/3`` is RAPM; ``a = 0`` is a constant volatility sigma0^2 (1 + mu).
    """

    mu: float = 0.0
    a: float = 1.0
    name = "power-law"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("mu", self.mu)
        _check_nonneg("a", self.a)

    def _sigma2(self, H):
        return self.sigma0**2 * (1.0 + self.mu * np.power(H, self.a))

    def _dforward(self, H):
        return 0.5 * self.sigma0**2 * (1.0 + (1.0 + self.a) * self.mu * np.power(H, self.a))


@dataclass(frozen=True)
class AmsterLinear(VolatilityModel):
    """Volume-dependent transaction costs: sigma^2 = sigma0^2 (1 - Le + kappa H) for H >= 0.

    ``Le >= 1`` gives sigma(0)^2 <= 0; such a model can be built but
    :func:`validate` reports it and the solvers refuse it.
    """

    Le: float = 0.0
    kappa: float = 0.0
    name = "amster"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("Le", self.Le)
        _check_nonneg("kappa", self.kappa)

    def _sigma2(self, H):
        return self.sigma0**2 * (1.0 - self.Le + self.kappa * H)

    def _dforward(self, H):
        return 0.5 * self.sigma0**2 * (1.0 - self.Le + 2.0 * self.kappa * H)


@dataclass(frozen=True)
class BaksteinHowison(VolatilityModel):
    """Liquidity model with sigma^2 quadratic in H (evaluated with sgn(H) = 1, |H| = H).

    ``gamma_ba`` is the relative bid-ask spread, ``lam`` the market depth and
    ``alpha`` the price-impact transfer coefficient.
    """

    gamma_ba: float = 0.0
    lam: float = 0.0
    alpha: float = 0.0
    name = "bakstein-howison"

    def __post_init__(self) -> None:
        super().__post_init__()
        _check_nonneg("gamma_ba", self.gamma_ba)
        _check_nonneg("lambda", self.lam)
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelInvalidError(f"alpha must lie in [0, 1], got {self.alpha!r}")

    @property
    def leland_number(self) -> float:
        return 2.0 * self.gamma_ba * _SQRT_2_OVER_PI

    def _coefficients(self):
        g, lam, w = self.gamma_ba, self.lam, (1.0 - self.alpha) ** 2
        c0 = 1.0 + g * g * w + 2.0 * _SQRT_2_OVER_PI * g
        c1 = 2.0 * lam + 2.0 * _SQRT_2_OVER_PI * lam * w * g
        c2 = lam * lam * w
        return c0, c1, c2

    def _sigma2(self, H):
        c0, c1, c2 = self._coefficients()
        return self.sigma0**2 * (c0 + H * (c1 + c2 * H))

    def _dforward(self, H):
        c0, c1, c2 = self._coefficients()
        return 0.5 * self.sigma0**2 * (c0 + H * (2.0 * c1 + 3.0 * c2 * H))


MODELS = {cls.name: cls for cls in (Constant, Frey, ModifiedFrey, RAPM, PowerLaw, AmsterLinear, BaksteinHowison)}

# config keys that differ from dataclass field names
_CONFIG_KEY_IN = {"lambda": "lam", "gamma": "gamma_ba"}
_CONFIG_KEY_OUT = {v: k for k, v in _CONFIG_KEY_IN.items()}


def sigma_squared(model: VolatilityModel, H: ArrayLike) -> ArrayLike:
    return model.sigma_squared(H)


def forward(model: VolatilityModel, H: ArrayLike) -> ArrayLike:
    """u = sigma(H)^2 H / 2."""
    return model.forward(H)


def forward_derivative(model: VolatilityModel, H: ArrayLike) -> ArrayLike:
    """d/dH of sigma(H)^2 H / 2."""
    return model.forward_derivative(H)


def beta_upper_bound(model: VolatilityModel, u: ArrayLike) -> ArrayLike:
    """2 u / sigma(0)^2, an upper bound of beta(u) for non-decreasing sigma."""
    return 2.0 * np.asarray(u, dtype=float) / model.variance_at_zero


def beta(model: VolatilityModel, u: ArrayLike, tol: Tolerance = DEFAULT_TOL) -> ArrayLike:
    """Inverse of the forward map: the H >= 0 with sigma(H)^2 H / 2 = u.

    Closed form for :class:`Constant`; otherwise a vectorised safeguarded
    Newton iteration on the bracket ``[0, 2u/sigma(0)^2]`` (capped just below
    1/mu for Frey).  Newton started from the right end of the bracket
    converges monotonically for the convex forward maps of all variants; a
    bisection step replaces any iterate that leaves the current bracket.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(u_arr)) or np.any(u_arr < 0):
        raise DomainError("beta is defined for u >= 0 only")
    if model.variance_at_zero <= 0:
        raise ModelInvalidError(f"{model.name}: sigma(0)^2 must be positive")
    if model.is_constant:
        return _shape_like(np.atleast_1d(2.0 * u_arr / model.sigma0**2), u_arr)
    if u_arr.ndim == 0:
        return _beta_scalar(model, float(u_arr), tol)

    uu = np.atleast_1d(u_arr)
    hi = np.atleast_1d(beta_upper_bound(model, uu)) * (1.0 + 1e-12) + 1e-300
    cap = model.h_max * (1.0 - FREY_EDGE)
    hi = np.minimum(hi, cap)
    short = model._forward(hi) < uu
    while np.any(short):
        # only reachable when sigma is decreasing somewhere
        if np.all(hi[short] >= cap):
            raise BudgetError(f"{model.name}: cannot bracket beta(u) below h_max")
        hi = np.where(short, np.minimum(2.0 * hi, cap), hi)
        short = model._forward(hi) < uu

    lo = np.zeros_like(uu)
    H = hi.copy()
    done = uu == 0
    H[done] = 0.0
    for _ in range(tol.max_iter):
        F = model._forward(H) - uu
        lo = np.where(F <= 0, H, lo)
        hi = np.where(F >= 0, H, hi)
        step = F / model._dforward(H)
        done |= (np.abs(F) <= 2 * _EPS * uu) | (np.abs(step) <= 2 * _EPS * H) | (hi - lo <= 2 * _EPS * hi)
        if np.all(done):
            break
        nxt = H - step
        # far above the target (pole of Frey, high-degree polynomials) Newton
        # only creeps; bisect until within a factor of two
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi) | (F > uu)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        H = np.where(done, H, nxt)
    else:
        raise BudgetError(f"{model.name}: beta inversion did not converge in {tol.max_iter} iterations")
    return _shape_like(H, u_arr)


def _beta_scalar(model: VolatilityModel, u: float, tol: Tolerance) -> float:
    # same iteration as the array path, on plain floats (hot inside ODE right-hand sides)
    if u == 0.0:
        return 0.0
    fwd, dfwd = model._forward, model._dforward
    cap = model.h_max * (1.0 - FREY_EDGE)
    hi = min(2.0 * u / model.variance_at_zero * (1.0 + 1e-12) + 1e-300, cap)
    while fwd(hi) < u:
        if hi >= cap:
            raise BudgetError(f"{model.name}: cannot bracket beta(u) below h_max")
        hi = min(2.0 * hi, cap)
    lo, H = 0.0, hi
    for _ in range(tol.max_iter):
        F = float(fwd(H)) - u
        if F <= 0:
            lo = H
        if F >= 0:
            hi = H
        step = F / float(dfwd(H))
        if abs(F) <= 2 * _EPS * u or abs(step) <= 2 * _EPS * H or hi - lo <= 2 * _EPS * hi:
            return H
        nxt = H - step
        if not lo < nxt < hi or F > u:
            nxt = 0.5 * (lo + hi)
        H = nxt
    raise BudgetError(f"{model.name}: beta inversion did not converge in {tol.max_iter} iterations")


def validate(model: VolatilityModel, points: int = 200) -> List[str]:
    """Numerical admissibility check; an empty list means the model is usable.

    Samples sigma^2 and the forward map on a log grid of H and reports a
    non-positive sigma(0)^2, non-finite values, a decreasing sigma^2 or a
    forward map that fails to increase strictly.
    """
    problems: List[str] = []
    s0 = model.variance_at_zero
    if not math.isfinite(s0):
        problems.append(f"sigma(0)^2 = {s0} is not finite")
    elif s0 <= 0:
        problems.append(f"sigma(0)^2 = {s0:.6g} <= 0")

    upper = min(model.h_max * (1.0 - 1e-6), 1e6)
    H = np.concatenate([[0.0], np.logspace(-6, math.log10(upper), points)])
    with np.errstate(over="ignore", invalid="ignore"):
        s2 = model._sigma2(H)
        fw = model._forward(H)
        dfw = model._dforward(H)
    if not (np.all(np.isfinite(s2)) and np.all(np.isfinite(fw)) and np.all(np.isfinite(dfw))):
        first = H[~(np.isfinite(s2) & np.isfinite(fw) & np.isfinite(dfw))][0]
        problems.append(f"non-finite volatility values starting at H = {first:.6g}")
        return problems
    drop = np.diff(s2) < -1e-12 * np.abs(s2[1:])
    if np.any(drop):
        problems.append(f"sigma(H)^2 decreases near H = {H[1:][drop][0]:.6g}")
    if np.any(np.diff(fw) <= 0) or np.any(dfw[1:] <= 0):
        problems.append("sigma(H)^2 H / 2 is not strictly increasing")
    return problems


def ensure_admissible(model: VolatilityModel) -> None:
    problems = validate(model)
    if problems:
        raise ModelInvalidError(f"{model.name} model is not admissible: " + "; ".join(problems))


def model_from_config(cfg: Mapping[str, object]) -> VolatilityModel:
    """Build a model from a flat key/value mapping such as ``{"model": "frey", "sigma0": 0.3, "mu": 0.1}``.

    Keys irrelevant to the chosen model are ignored; missing parameters fall
    back to the dataclass defaults (which reduce every model to constant
    volatility).
    """
    kind = str(cfg.get("model", "constant")).strip().lower()
    if kind not in MODELS:
        raise ModelInvalidError(f"unknown model {kind!r}; choose from {', '.join(sorted(MODELS))}")
    cls = MODELS[kind]
    wanted = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in cfg.items():
        if key == "model" or value is None:
            continue
        name = _CONFIG_KEY_IN.get(key, key)
        if name in wanted:
            try:
                kwargs[name] = int(value) if name == "N" else float(value)
            except (TypeError, ValueError):
                raise ModelInvalidError(f"parameter {key}={value!r} is not a number") from None
    if "sigma0" not in kwargs:
        kwargs["sigma0"] = 0.3
    return cls(**kwargs)


def degenerate_constant(model: VolatilityModel) -> Constant:
    """Constant-volatility model with the same sigma0 (what a model reduces to at zero parameters)."""
    return Constant(model.sigma0)


__all__ = [
    "VolatilityModel", "Constant", "Frey", "ModifiedFrey", "RAPM", "PowerLaw",
    "AmsterLinear", "BaksteinHowison", "MODELS", "sigma_squared", "forward",
    "forward_derivative", "beta", "beta_upper_bound", "validate",
    "ensure_admissible", "model_from_config", "degenerate_constant",
]
