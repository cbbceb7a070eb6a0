"""Numeric kernels: adaptive quadrature, bracketed root-finding and an RK4 stepper.

All three routines share the :class:`Tolerance` contract.  Integrands passed to
:func:`integrate` are evaluated on whole Gauss-Kronrod panels at once, so they
should accept a 1-D numpy array (set ``vectorized=False`` otherwise).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetError, DomainError, NoBracketError, NonFiniteError

_EPS = np.finfo(float).eps

# 7-point Gauss / 15-point Kronrod pair on [-1, 1] (QUADPACK qk15 abscissae).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[9, 11, 13]] = _WG[2::-1]
_GAUSS_W[7] = _WG[3]

MAX_DEPTH = 60


@dataclass(frozen=True)
class Tolerance:
    """Absolute/relative accuracy target plus an iteration budget."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError(f"tolerances must be positive, got {self.abs_tol}, {self.rel_tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter}")

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(self.abs_tol * factor, self.rel_tol * factor, self.max_iter)


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class RootInfo:
    residual: float
    iterations: int
    evaluations: int
    bracket: Tuple[float, float]


def _panel(f, a: float, b: float, vectorized: bool) -> Tuple[float, float]:
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = center + half * _NODES
    if vectorized:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape)
    else:
        y = np.array([f(float(xi)) for xi in x], dtype=float)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise NonFiniteError(f"integrand is not finite at x={bad!r}")
    kronrod = half * float(_KRONROD_W @ y)
    gauss = half * float(_GAUSS_W @ y)
    return kronrod, abs(kronrod - gauss)


def integrate(
    f: Callable,
    a: float,
    b: float,
    tol: Tolerance = DEFAULT_TOL,
    vectorized: bool = True,
) -> QuadratureResult:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over ``[a, b]``.

    The panel with the largest error estimate is bisected until the summed
    estimate is below ``max(abs_tol, rel_tol * |value|)``.  The endpoints are
    never evaluated, so integrable endpoint singularities (0/0 limits, log
    blow-ups) are acceptable.

    Raises
    ------
    NonFiniteError
        ``f`` returned NaN or an infinity at a quadrature node.
    BudgetError
        More than ``tol.max_iter`` bisections, or a panel deeper than 60 levels.
    """
    a = float(a)
    b = float(b)
    if not a <= b:
        raise DomainError(f"integration limits out of order: a={a} > b={b}")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)

    value, err = _panel(f, a, b, vectorized)
    evaluations = 15
    # heap of (-error, a, b, value, depth)
    heap = [(-err, a, b, value, 0)]
    total, total_err = value, err
    splits = 0
    while total_err > max(tol.abs_tol, tol.rel_tol * abs(total)):
        neg_err, pa, pb, pval, depth = heapq.heappop(heap)
        if splits >= tol.max_iter or depth >= MAX_DEPTH:
            raise BudgetError(
                f"quadrature on [{a}, {b}] did not converge: estimate {total!r}, "
                f"error {total_err:.3e} after {splits} subdivisions"
            )
        mid = 0.5 * (pa + pb)
        lv, le = _panel(f, pa, mid, vectorized)
        rv, re = _panel(f, mid, pb, vectorized)
        evaluations += 30
        splits += 1
        heapq.heappush(heap, (-le, pa, mid, lv, depth + 1))
        heapq.heappush(heap, (-re, mid, pb, rv, depth + 1))
        # re-sum instead of updating incrementally to avoid drift
        total = math.fsum(item[3] for item in heap)
        total_err = math.fsum(-item[0] for item in heap)
    return QuadratureResult(total, total_err, evaluations)


def find_root_monotone(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance = DEFAULT_TOL,
    *,
    g_lo: Optional[float] = None,
    g_hi: Optional[float] = None,
    full_output: bool = False,
):
    """Root of a monotone scalar function on a sign-changing bracket.

    Brent-Dekker iteration (inverse quadratic / secant steps, bisection
    fallback); the bracket is kept at every step.  Stops once
    ``|g(x)| <= abs_tol`` or the bracket is narrower than ``rel_tol * |x|``.
    Known endpoint values may be passed as ``g_lo``/``g_hi`` to save calls.
    """
    a, b = float(lo), float(hi)
    evaluations = 0

    def call(x: float) -> float:
        nonlocal evaluations
        evaluations += 1
        y = float(g(x))
        if not math.isfinite(y):
            raise NonFiniteError(f"root function is not finite at x={x!r}")
        return y

    fa = call(a) if g_lo is None else float(g_lo)
    fb = call(b) if g_hi is None else float(g_hi)
    if fa * fb > 0:
        raise NoBracketError(f"g({a})={fa!r} and g({b})={fb!r} have the same sign")

    def done(x, fx, it):
        if full_output:
            return x, RootInfo(abs(fx), it, evaluations, (min(x, c), max(x, c)))
        return x

    if fa == 0.0:
        c = a
        return done(a, fa, 0)
    if fb == 0.0:
        c = b
        return done(b, fb, 0)

    c, fc = a, fa
    d = e = b - a
    for it in range(1, tol.max_iter + 1):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * tol.rel_tol * abs(b) + 1e-300
        xm = 0.5 * (c - b)
        if abs(fb) <= tol.abs_tol or abs(xm) <= tol1:
            if abs(fb) > 10 * tol.abs_tol and abs(c - b) > 8 * _EPS * abs(b):
                # bracket closed on rel_tol but the residual still is large
                tol = Tolerance(tol.abs_tol, tol.rel_tol * 1e-3, tol.max_iter)
            else:
                return done(b, fb, it)
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b = b + d if abs(d) > tol1 else b + math.copysign(tol1, xm)
        fb = call(b)
    raise BudgetError(f"root finding did not converge in {tol.max_iter} iterations (x={b!r}, g={fb!r})")


def _rk4_step(rhs, x: float, u: float, h: float) -> float:
    k1 = rhs(x, u)
    k2 = rhs(x + 0.5 * h, u + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h, u + 0.5 * h * k2)
    k4 = rhs(x + h, u + h * k3)
    return u + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def solve_ivp(
    rhs: Callable[[float, float], float],
    x0: float,
    u0: float,
    x_end: float,
    tol: Tolerance = DEFAULT_TOL,
    x_eval: Optional[Sequence[float]] = None,
    h0: Optional[float] = None,
    max_steps: int = 100_000,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate the scalar ODE ``u' = rhs(x, u)`` from ``x0`` to ``x_end``.

    Classical RK4 with step-doubling error control; accepted steps use the
    locally extrapolated value.  Returns ``(x, u)`` arrays: every accepted step,
    or exactly the points of ``x_eval`` (sorted, inside ``[x0, x_end]``) when
    given.
    """
    x0 = float(x0)
    x_end = float(x_end)
    if x_end < x0:
        raise DomainError(f"x_end={x_end} precedes x0={x0}")
    if not math.isfinite(u0):
        raise NonFiniteError(f"initial value {u0!r} is not finite")

    if x_eval is not None:
        targets = np.asarray(x_eval, dtype=float)
        if np.any(np.diff(targets) < 0) or (targets.size and (targets[0] < x0 or targets[-1] > x_end)):
            raise DomainError("x_eval must be sorted and lie inside [x0, x_end]")
    else:
        targets = None

    xs = [x0]
    us = [float(u0)]
    out_x, out_u = [], []
    ti = 0
    if targets is not None:
        while ti < targets.size and targets[ti] <= x0:
            out_x.append(float(targets[ti]))
            out_u.append(float(u0))
            ti += 1

    span = x_end - x0
    h = float(h0) if h0 else max(span, 1.0) * 1e-2
    x, u = x0, float(u0)
    steps = 0
    while x < x_end and (targets is None or ti < targets.size):
        if steps >= max_steps:
            raise BudgetError(f"ODE integration exceeded {max_steps} steps at x={x!r}")
        stop = x_end if targets is None else min(x_end, float(targets[ti]))
        step = min(h, stop - x)
        hit = step == stop - x

        full = _rk4_step(rhs, x, u, step)
        half = _rk4_step(rhs, x, u, 0.5 * step)
        two_half = _rk4_step(rhs, x + 0.5 * step, half, 0.5 * step)
        if not (math.isfinite(full) and math.isfinite(two_half)):
            raise NonFiniteError(f"ODE solution is not finite near x={x!r}")
        err = abs(two_half - full) / 15.0
        scale = tol.abs_tol + tol.rel_tol * max(abs(u), abs(two_half))
        steps += 1
        if err <= scale:
            x = stop if hit else x + step
            u = two_half + (two_half - full) / 15.0
            xs.append(x)
            us.append(u)
            if targets is not None:
                while ti < targets.size and targets[ti] <= x:
                    out_x.append(float(targets[ti]))
                    out_u.append(u)
                    ti += 1
            factor = 4.0 if err == 0 else min(4.0, 0.9 * (scale / err) ** 0.2)
            # keep the nominal step when a grid point truncated it
            h = max(h, step * factor) if hit else step * factor
        else:
            h = step * max(0.1, 0.9 * (scale / err) ** 0.2)
        if h < 16 * _EPS * max(1.0, abs(x)):
            raise BudgetError(f"ODE step size underflow at x={x!r}")

    if targets is not None:
        return np.array(out_x), np.array(out_u)
    return np.array(xs), np.array(us)
