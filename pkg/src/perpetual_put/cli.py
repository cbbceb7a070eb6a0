"""Command-line front end.

Every command prints either CSV (one header line) or a single JSON object with
``config``, ``results`` and ``checks`` keys.  Exit codes: 0 success, 1 a check
failed, 2 invalid input or inadmissible model, 3 numerical budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import volatility
from .boundary import MarketParams, solve_rho
from .errors import BudgetError, ModelInvalidError, NonFiniteError, PerpetualPutError
from .merton import check_bounds, envelopes, merton_value
from .numerics import Tolerance
from .pricer import boundary_slope, pde_residual, price, price_curve, price_h
from .sensitivity import expansion, sweep, validate_expansion



def _say(level: str, msg: str) -> None:
    print(f"perpetual-put: {level}: {msg}", file=sys.stderr)

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

FREY_REFERENCE_MU = 0.22

DEFAULT_MU_GRIDS = {
    "frey": [0.0, 0.01, 0.05, 0.10, 0.15, 0.20, 0.22],
    "modified-frey": [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
    "rapm": [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
    "power-law": [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
}
DEFAULT_SENSITIVITY_MU = [0.0, 0.001, 0.01, 0.02, 0.05, 0.1]

# (flag, dest, type, help) of the model/market options shared by all commands
_MODEL_FLAGS = [
    ("--model", "model", str, "constant, frey, modified-frey, rapm, power-law, amster or bakstein-howison"),
    ("--sigma0", "sigma0", float, "base volatility (default 0.3)"),
    ("--mu", "mu", float, "model parameter of frey, modified-frey, rapm and power-law"),
    ("--N", "N", int, "number of series terms for modified-frey (default 10)"),
    ("--Le", "Le", float, "amster: Leland number, must be < 1"),
    ("--kappa", "kappa", float, "amster: slope in H"),
    ("--lambda", "lambda", float, "bakstein-howison: market depth"),
    ("--alpha", "alpha", float, "bakstein-howison: price-impact transfer coefficient in [0, 1]"),
    ("--gamma", "gamma", float, "bakstein-howison: relative bid-ask spread"),
    ("--a", "a", float, "power-law exponent (default 1)"),
    ("--E", "E", float, "strike (default 100)"),
    ("--r", "r", float, "interest rate (default 0.1)"),
    ("--tol", "tol", float, "absolute and relative tolerance (default 1e-10)"),
]
_DEFAULTS = {"model": "constant", "sigma0": 0.3, "E": 100.0, "r": 0.1, "tol": 1e-10, "format": "csv"}


class InputError(PerpetualPutError):
    """Malformed command line or config file."""


# ---------------------------------------------------------------- config

def read_config_file(path: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: Dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def _parse_list(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    items = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError:
        raise InputError(f"not a list of numbers: {text!r}") from None


def _coerce(key: str, value: Any, kind) -> Any:
    if value is None or kind is str:
        return value
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise InputError(f"{key}: {value!r} is not a valid {kind.__name__}") from None


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """Merge defaults, the optional config file and explicit flags (flags win)."""
    cfg: Dict[str, Any] = dict(_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key not in ("config", "handler") and value is not None:
            cfg[key] = value
    for _, dest, kind, _ in _MODEL_FLAGS:
        if dest in cfg:
            cfg[dest] = _coerce(dest, cfg[dest], kind)
    if cfg.get("format") not in ("csv", "json"):
        raise InputError(f"format must be csv or json, got {cfg.get('format')!r}")
    cfg["model"] = str(cfg["model"]).strip().lower()
    return cfg


def build_model(cfg: Dict[str, Any]) -> volatility.VolatilityModel:
    keys = ("model", "sigma0", "mu", "N", "Le", "kappa", "lambda", "alpha", "gamma", "a")
    return volatility.model_from_config({k: cfg[k] for k in keys if cfg.get(k) is not None})


def build_market(cfg: Dict[str, Any]) -> MarketParams:
    return MarketParams(E=float(cfg["E"]), r=float(cfg["r"]))


def build_tol(cfg: Dict[str, Any]) -> Tolerance:
    t = float(cfg["tol"])
    return Tolerance(t, t)


def _admissible(model) -> None:
    problems = volatility.validate(model)
    if problems:
        raise ModelInvalidError(f"{model.name} model is not admissible: " + "; ".join(problems))


def _advisories(model) -> List[Dict[str, Any]]:
    if isinstance(model, volatility.Frey) and model.mu > FREY_REFERENCE_MU:
        msg = f"frey mu = {model.mu:g} lies outside the reference range mu <= {FREY_REFERENCE_MU}"
        _say("warning", msg)
        return [{"check": "advisory", "passed": True, "detail": msg}]
    return []


# ---------------------------------------------------------------- commands

def cmd_boundary(cfg, model, market, tol):
    method = cfg.get("method") or "h"
    other = "u" if method == "h" else "h"
    main = solve_rho(model, market, tol, method)
    checks = []
    try:
        alt = solve_rho(model, market, tol, other).rho
        delta = main.rho - alt
        agree = abs(delta) <= 1e-6 * market.E
        checks.append({"check": "method_agreement", "passed": agree, "detail": f"|delta| = {abs(delta):.3e}"})
    except BudgetError as exc:
        alt = delta = None
        checks.append({"check": "method_agreement", "passed": False, "detail": f"{other}-method failed: {exc}"})
    row = {
        "rho": main.rho, "residual": main.residual, "method": main.method,
        "iterations": main.iterations, "evaluations": main.evaluations,
        "rho_alt": alt, "delta": delta,
    }
    return [row], checks


def cmd_price(cfg, model, market, tol):
    S_list = _parse_list(cfg.get("S")) or [market.E]
    rho = solve_rho(model, market, tol).rho
    rows = []
    worst = 0.0
    for S in S_list:
        V = price(model, market, rho, S, tol)
        V_h = price_h(model, market, rho, S, tol)
        worst = max(worst, abs(V - V_h))
        rows.append({"S": S, "V": V, "V_h": V_h, "intrinsic": max(market.E - S, 0.0), "rho": rho})
    checks = [{"check": "method_agreement", "passed": worst <= 1e-6 * market.E, "detail": f"max |V - V_h| = {worst:.3e}"}]
    return rows, checks


def _grid(cfg, rho, market) -> np.ndarray:
    explicit = _parse_list(cfg.get("s_list"))
    if explicit is not None:
        return np.array(explicit, dtype=float)
    s_min = float(cfg["s_min"]) if cfg.get("s_min") is not None else rho
    s_max = float(cfg["s_max"]) if cfg.get("s_max") is not None else 3.0 * market.E
    n = int(cfg["s_points"]) if cfg.get("s_points") is not None else 100
    if n < 1 or not 0 < s_min <= s_max:
        raise InputError("need 0 < s-min <= s-max and s-points >= 1")
    return np.linspace(s_min, s_max, n) if n > 1 else np.array([s_min])


def cmd_curve(cfg, model, market, tol):
    rho = solve_rho(model, market, tol).rho
    curve = price_curve(model, market, _grid(cfg, rho, market), tol, rho=rho)
    lower, upper = envelopes(model, market.E, market.r)
    lo = np.atleast_1d(merton_value(lower, curve.S))
    hi = np.atleast_1d(merton_value(upper, curve.S)) if upper is not None else [None] * len(curve)
    rows = [
        {"S": s, "V": v, "U": u, "H": h, "intrinsic": i, "merton_lo": a, "merton_hi": b}
        for s, v, u, h, i, a, b in zip(curve.S, curve.V, curve.U, curve.H, curve.intrinsic, lo, hi)
    ]
    report = check_bounds(model, market, curve, tol=1e-6 * market.E)
    detail = "; ".join(report.messages) or "merton_lo <= V <= merton_hi on the grid"
    return rows, [{"check": "envelopes", "passed": report.passed, "detail": detail}]


def _round(value: Optional[float], places: int) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_EVEN))


def cmd_table(cfg, model, market, tol):
    if not hasattr(model, "mu"):
        raise ModelInvalidError(f"table sweeps mu; the {model.name} model has no mu parameter")
    mus = _parse_list(cfg.get("mu_list"))
    if mus is None:
        mus = DEFAULT_MU_GRIDS.get(model.name, DEFAULT_MU_GRIDS["rapm"])
    if any(m < 0 for m in mus):
        raise InputError("mu values must be non-negative")
    places = int(cfg.get("decimals", 4))
    base = model.to_config()
    rows, checks = [], []
    for mu in mus:
        member = volatility.model_from_config({**base, "mu": mu})
        checks.extend(_advisories(member))
        try:
            _admissible(member)
            rho = solve_rho(member, market, tol).rho
            v_e = price(member, market, rho, market.E, tol)
            rows.append({"mu": mu, "rho": _round(rho, places), "V_at_E": _round(v_e, places)})
        except PerpetualPutError as exc:
            _say("warning", f"mu = {mu:g} failed: {exc}")
            code = EXIT_BUDGET if isinstance(exc, (BudgetError, NonFiniteError)) else EXIT_INPUT
            rows.append({"mu": mu, "rho": None, "V_at_E": None})
            checks.append({"check": f"row mu={mu:g}", "passed": False, "detail": str(exc), "exit": code})
    return rows, checks


def cmd_sensitivity(cfg, model, market, tol):
    family = model.name
    a = cfg.get("a")
    exp = expansion(family, model.sigma0, market, a)
    mus = _parse_list(cfg.get("mu_list"))
    if mus is None:
        mus = DEFAULT_SENSITIVITY_MU
    rows = []
    for row in sweep(family, model.sigma0, market, mus, exp.a, tol):
        row.update(rho0=exp.rho0, drho_dmu=exp.drho_dmu, a=exp.a)
        rows.append(row)
    rep = validate_expansion(family, model.sigma0, market, [1e-3, 1e-4], exp.a, tol)
    rel = rep.slope_error / abs(exp.drho_dmu)
    checks = [{
        "check": "finite_difference_slope",
        "passed": rel <= 0.01,
        "detail": f"observed {rep.observed_slope:.6f} vs predicted {exp.drho_dmu:.6f} (rel. error {rel:.2e})",
    }]
    return rows, checks


def run_checks(model, market, tol) -> List[Dict[str, Any]]:
    """Admissibility, method agreement, smooth pasting, PDE residual and envelope checks."""
    checks: List[Dict[str, Any]] = []

    def add(name, passed, detail):
        checks.append({"check": name, "passed": bool(passed), "detail": detail})

    problems = volatility.validate(model)
    add("admissible", not problems, "; ".join(problems) or "sigma(0)^2 > 0, sigma^2 non-decreasing")
    if problems:
        return checks
    checks.extend(_advisories(model))
    E = market.E
    rho_h = solve_rho(model, market, tol, "h").rho
    try:
        rho_u = solve_rho(model, market, tol, "u").rho
        add("method_agreement", abs(rho_u - rho_h) <= 1e-6 * E, f"|rho_u - rho_h| = {abs(rho_u - rho_h):.3e}")
    except BudgetError as exc:
        add("method_agreement", False, f"u-method failed: {exc}")

    curve = price_curve(model, market, np.linspace(rho_h, 4.0 * E, 2000), tol, rho=rho_h)
    slope = boundary_slope(curve)
    add("smooth_pasting", abs(slope + 1.0) <= 1e-3, f"dV/dS(rho+) = {slope:.8f}")
    vm = abs(curve.V[0] - (E - rho_h))
    add("value_matching", vm <= 1e-8, f"|V(rho) - (E - rho)| = {vm:.3e}")
    idx = np.linspace(10, len(curve) - 11, 10).astype(int)
    worst = max(abs(pde_residual(model, market, curve, int(i))) / (market.r * curve.V[i]) for i in idx)
    add("pde_residual", worst <= 1e-3, f"max |residual| / rV = {worst:.3e}")

    report = check_bounds(model, market, curve, tol=1e-6 * E)
    add("envelopes", report.passed, "; ".join(report.messages) or "bracket holds")
    return checks


def cmd_validate(cfg, model, market, tol):
    checks = run_checks(model, market, tol)
    return [{"check": c["check"], "passed": c["passed"], "detail": c["detail"]} for c in checks], checks


COMMANDS = {
    "boundary": cmd_boundary,
    "price": cmd_price,
    "curve": cmd_curve,
    "table": cmd_table,
    "sensitivity": cmd_sensitivity,
    "validate": cmd_validate,
}

CSV_COLUMNS = {
    "boundary": ["rho", "residual", "method", "iterations", "evaluations", "rho_alt", "delta"],
    "price": ["S", "V", "V_h", "intrinsic", "rho"],
    "curve": ["S", "V", "U", "H", "intrinsic", "merton_lo", "merton_hi"],
    "table": ["mu", "rho", "V_at_E"],
    "sensitivity": ["mu", "rho_exact", "rho_linear", "gap", "rho0", "drho_dmu", "a"],
    "validate": ["check", "passed", "detail"],
}


# ---------------------------------------------------------------- output

def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _csv_cell(column: str, value, command: str, places: int) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if command == "table" and column != "mu":
            return f"{value:.{places}f}"
        return repr(value)
    return str(value)


def render(command: str, cfg: Dict[str, Any], rows, checks, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "config": {k: _plain(v) for k, v in sorted(cfg.items()) if k not in ("out", "format")},
            "results": [{k: _plain(v) for k, v in row.items()} for row in rows],
            "checks": [{k: _plain(c[k]) for k in ("check", "passed", "detail")} for c in checks],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = CSV_COLUMNS[command]
    places = int(cfg.get("decimals", 4))
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(c, row.get(c), command, places) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and market")
    for flag, dest, _, text in _MODEL_FLAGS:
        g.add_argument(flag, dest=dest, default=None, metavar="NAME" if dest == "model" else "X", help=text)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--out", default=None, metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--config", default=None, metavar="PATH", help="key = value file; flags override it")

    parser = argparse.ArgumentParser(
        prog="perpetual-put",
        description="Perpetual American put under nonlinear Black-Scholes volatility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boundary", parents=[common], help="early-exercise boundary rho")
    p.add_argument("--method", choices=("h", "u"), default=None)

    p = sub.add_parser("price", parents=[common], help="option value at given asset prices")
    p.add_argument("--S", dest="S", default=None, help="comma-separated asset prices (default: E)")

    p = sub.add_parser("curve", parents=[common], help="price curve with Merton envelopes")
    p.add_argument("--s-min", dest="s_min", default=None)
    p.add_argument("--s-max", dest="s_max", default=None)
    p.add_argument("--s-points", dest="s_points", default=None)
    p.add_argument("--s-list", dest="s_list", default=None, help="explicit comma-separated grid")

    p = sub.add_parser("table", parents=[common], help="rho and V(E) over a list of mu")
    p.add_argument("--mu-list", dest="mu_list", default=None)
    p.add_argument("--decimals", dest="decimals", type=int, default=None)

    p = sub.add_parser("sensitivity", parents=[common], help="linear expansion of rho in mu")
    p.add_argument("--mu-list", dest="mu_list", default=None)

    sub.add_parser("validate", parents=[common], help="admissibility and consistency checks")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        cfg = resolve_config(args)
        model = build_model(cfg)
        market = build_market(cfg)
        tol = build_tol(cfg)
        if command != "validate":
            _admissible(model)
        advisories = _advisories(model) if command not in ("table", "validate") else []
        rows, checks = COMMANDS[command](cfg, model, market, tol)
        checks = advisories + checks
    except (BudgetError, NonFiniteError) as exc:
        _say("error", str(exc))
        return EXIT_BUDGET
    except PerpetualPutError as exc:
        _say("error", str(exc))
        return EXIT_INPUT
    except (TypeError, ValueError) as exc:
        _say("error", str(exc))
        return EXIT_INPUT

    text = render(command, cfg, rows, checks, cfg["format"])
    if cfg.get("out"):
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    row_codes = [c["exit"] for c in checks if "exit" in c]
    if row_codes:
        return max(row_codes)
    if any(not c["passed"] for c in checks):
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
