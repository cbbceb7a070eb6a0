"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary."""

import time

import numpy as np
import pytest

from perpetual_put.boundary import MarketParams, solve_rho_h, solve_rho_u
from perpetual_put.merton import MertonSolution, check_bounds, envelopes, merton_value
from perpetual_put.numerics import DEFAULT_TOL
from perpetual_put.pricer import boundary_slope, pde_residual, price, price_curve, price_h
from perpetual_put.sensitivity import constant_shift_rho, expansion, family_model, validate_expansion
from perpetual_put.volatility import (
    RAPM,
    AmsterLinear,
    BaksteinHowison,
    Constant,
    Frey,
    ModifiedFrey,
    beta,
    beta_upper_bound,
    degenerate_constant,
    forward,
)

MARKET = MarketParams(E=100.0, r=0.1)
SIGMA0 = 0.3
TABLE_TOL = 0.01

# per-model outcomes of the parametrised criteria, merged into one line each
_PARTS = {6: {}, 7: {}}

# (mu, rho, V(E)) reference rows
FREY_TABLE = [
    (0.00, 68.9655, 13.5909), (0.01, 68.2852, 13.8005), (0.05, 65.7246, 14.6167), (0.10, 62.8036, 15.5961),
    (0.15, 60.1175, 16.5389), (0.20, 57.6177, 17.4510), (0.22, 56.6627, 17.8083),
]
MODIFIED_FREY_TABLE = [
    (0.0, 68.9655, 13.5909), (0.1, 62.8037, 15.5961), (0.5, 45.3007, 22.4529), (1.0, 31.0862, 29.5719),
    (2.0, 16.3126, 41.0654), (4.0, 8.3818, 56.1777), (8.0, 5.4556, 70.2259),
]
RAPM_TABLE = [
    (0.0, 68.9655, 13.5909), (0.1, 66.7331, 14.5761), (0.5, 59.6973, 17.9398), (1.0, 53.3234, 21.3434),
    (2.0, 44.5408, 26.6857), (4.0, 34.0899, 34.3393), (8.0, 23.6125, 44.1774),
]
TABLE_MODELS = (
    [Frey(SIGMA0, mu) for mu, _, _ in FREY_TABLE]
    + [ModifiedFrey(SIGMA0, mu, 10) for mu, _, _ in MODIFIED_FREY_TABLE]
    + [RAPM(SIGMA0, mu) for mu, _, _ in RAPM_TABLE]
)


def _reproduce(model_of, table):
    failures = []
    for mu, rho_ref, v_ref in table:
        m = model_of(mu)
        rho = solve_rho_h(m, MARKET).rho
        v = price(m, MARKET, rho, MARKET.E)
        if abs(rho - rho_ref) > TABLE_TOL:
            failures.append(f"mu={mu:g} rho {rho:.4f} vs {rho_ref}")
        if abs(v - v_ref) > TABLE_TOL:
            failures.append(f"mu={mu:g} V(E) {v:.4f} vs {v_ref}")
    return failures


def test_criterion_1_merton(record):
    t0 = time.perf_counter()
    m = Constant(SIGMA0)
    rho = solve_rho_h(m, MARKET).rho
    v = price(m, MARKET, rho, MARKET.E)
    elapsed = time.perf_counter() - t0
    exact = MertonSolution.from_volatility(SIGMA0, MARKET.E, MARKET.r)
    ok = (
        abs(rho - exact.rho_gamma) <= 1e-4
        and abs(v - merton_value(exact, MARKET.E)) <= 1e-4
        and abs(rho - 68.9655) <= TABLE_TOL
        and abs(v - 13.5909) <= TABLE_TOL
        and elapsed < 0.1
    )
    record(1, ok, f"rho={rho:.6f} V(E)={v:.6f} time={elapsed * 1e3:.1f} ms")
    assert ok


def test_criterion_2_frey_table(record):
    t0 = time.perf_counter()
    failures = _reproduce(lambda mu: Frey(SIGMA0, mu), FREY_TABLE)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 5.0
    record(2, ok, f"{len(FREY_TABLE)} columns, time={elapsed:.2f} s" + ("; " + "; ".join(failures) if failures else ""))
    assert ok, failures


def test_criterion_3_modified_frey_table(record):
    failures = _reproduce(lambda mu: ModifiedFrey(SIGMA0, mu, 10), MODIFIED_FREY_TABLE)
    record(3, not failures, "; ".join(failures) or "all columns within 0.01")
    assert not failures, failures


def test_criterion_4_rapm_table(record):
    failures = _reproduce(lambda mu: RAPM(SIGMA0, mu), RAPM_TABLE)
    record(4, not failures, "; ".join(failures) or "all columns within 0.01")
    assert not failures, failures


def test_criterion_5_formulation_equivalence(record):
    worst_rho = worst_v = 0.0
    for m in TABLE_MODELS:
        rho_u = solve_rho_u(m, MARKET).rho
        rho_h = solve_rho_h(m, MARKET).rho
        worst_rho = max(worst_rho, abs(rho_u - rho_h))
        for S in (1.01 * rho_h, MARKET.E, 2 * MARKET.E):
            worst_v = max(worst_v, abs(price(m, MARKET, rho_h, S) - price_h(m, MARKET, rho_h, S)))
    bound = 1e-6 * MARKET.E
    ok = worst_rho <= bound and worst_v <= bound
    record(5, ok, f"{len(TABLE_MODELS)} models, max|drho|={worst_rho:.2e}, max|dV|={worst_v:.2e}")
    assert ok


@pytest.mark.parametrize("m", [Constant(SIGMA0), Frey(SIGMA0, 0.1), RAPM(SIGMA0, 1.0)], ids=lambda m: m.name)
def test_criterion_6_smooth_pasting_and_residual(m, record):
    rho = solve_rho_h(m, MARKET).rho
    curve = price_curve(m, MARKET, np.linspace(rho, 4 * MARKET.E, 2000), rho=rho)
    slope = boundary_slope(curve)
    value_gap = abs(curve.V[0] - (MARKET.E - rho))
    idx = np.linspace(10, len(curve) - 11, 10).astype(int)
    worst = max(abs(pde_residual(m, MARKET, curve, int(i))) / (MARKET.r * curve.V[i]) for i in idx)
    ok = abs(slope + 1) <= 1e-3 and value_gap <= 1e-8 and worst <= 1e-3
    _PARTS[6][m.name] = (ok, f"{m.name}: dV/dS+1={slope + 1:.1e} |V(rho)-(E-rho)|={value_gap:.0e} res/rV={worst:.1e}")
    record(6, all(p[0] for p in _PARTS[6].values()), " | ".join(p[1] for p in _PARTS[6].values()))
    assert ok


@pytest.mark.parametrize("m", [Frey(SIGMA0, 0.1), RAPM(SIGMA0, 1.0)], ids=lambda m: m.name)
def test_criterion_7_comparison_bounds(m, record):
    rho = solve_rho_h(m, MARKET).rho
    grid = np.linspace(0.5 * rho, 4 * MARKET.E, 100)
    curve = price_curve(m, MARKET, grid, rho=rho)
    lower, upper = envelopes(m, MARKET.E, MARKET.r)
    slack = 1e-6 * MARKET.E
    rep = check_bounds(m, MARKET, curve, tol=slack)
    ok = (
        upper is not None
        and upper.rho_gamma - slack <= rho <= lower.rho_gamma + slack
        and abs(lower.rho_gamma - 68.9655) <= 1e-4
        and np.all(merton_value(lower, grid) - slack <= curve.V)
        and np.all(curve.V <= merton_value(upper, grid) + slack)
        and rep.passed
    )
    _PARTS[7][m.name] = (ok, f"{m.name}: {upper.rho_gamma:.4f} <= {rho:.4f} <= {lower.rho_gamma:.4f}")
    record(7, all(p[0] for p in _PARTS[7].values()), " | ".join(p[1] for p in _PARTS[7].values()))
    assert ok


def test_criterion_8_sensitivity(record):
    parts, ok = [], True
    for family in ("rapm", "frey"):
        rep = validate_expansion(family, SIGMA0, MARKET, [1e-3, 1e-4])
        predicted = rep.expansion.drho_dmu
        rel = abs(rep.observed_slope - predicted) / abs(predicted)
        ok &= rel <= 0.01
        parts.append(f"{family}: fd {rep.observed_slope:.4f} vs {predicted:.4f}")
    assert expansion("power-law", SIGMA0, MARKET, a=0.0).a == 0.0
    worst = 0.0
    for mu in (0.0, 0.5, 1.0):
        rho = solve_rho_h(family_model("power-law", SIGMA0, mu, 0.0), MARKET).rho
        worst = max(worst, abs(rho - constant_shift_rho(SIGMA0, MARKET, mu)))
    ok &= worst <= 1e-8
    parts.append(f"a=0 closed form max err {worst:.1e}")
    record(8, ok, "; ".join(parts))
    assert ok


def test_criterion_9_property_suite(record):
    variants = [
        Constant(SIGMA0), Frey(SIGMA0, 0.1), ModifiedFrey(SIGMA0, 2.0, 10), RAPM(SIGMA0, 1.0),
        AmsterLinear(SIGMA0, 0.2, 0.1), BaksteinHowison(SIGMA0, 0.05, 0.1, 0.5),
    ]
    u = np.logspace(-6, 3, 50)
    bad = []
    for m in variants:
        H = beta(m, u)
        if np.any(np.abs(forward(m, H) - u) > 10 * DEFAULT_TOL.abs_tol * np.maximum(1.0, u)):
            bad.append(f"{m.name} round trip")
        if np.any(np.diff(H) <= 0):
            bad.append(f"{m.name} monotone")
        if np.any(H < 0) or np.any(H > beta_upper_bound(m, u) * (1 + 1e-12)):
            bad.append(f"{m.name} bound")
    degenerate = [
        Frey(SIGMA0, 0.0), ModifiedFrey(SIGMA0, 0.0, 10), RAPM(SIGMA0, 0.0), AmsterLinear(SIGMA0, 0.0, 0.0),
        BaksteinHowison(SIGMA0, 0.0, 0.0, 0.3),
    ]
    H_grid = np.concatenate([[0.0], np.logspace(-6, 3, 50)])
    for m in degenerate:
        c = degenerate_constant(m)
        for a, b in ((forward(m, H_grid), forward(c, H_grid)), (beta(m, u), beta(c, u))):
            if np.any(np.abs(a - b) > 1e-12 * np.maximum(np.abs(b), 1e-300)):
                bad.append(f"{m.name} degenerate")
    record(9, not bad, "; ".join(bad) or f"{len(variants)} variants x 50 u-values, {len(degenerate)} degenerate variants")
    assert not bad, bad
