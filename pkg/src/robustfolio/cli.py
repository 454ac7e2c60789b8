"""Batch front end: configs in, CSV/JSON tables out.

Commands
--------
solve        baseline optimum: pi_star, V0, foc_residual, boundary [, davis_price]
sensitivity  first-order report: q, V_prime0, pi_prime0, kappa_u, branch,
             kl_V_prime0, davis_price, davis_prime0 (nan where undefined)
robust       per-radius solve: delta, V_delta, pi_delta, transport_cost,
             martingale_residual, davis_price_delta
davis        pricing cross-check: davis_price, davis_price_root, davis_prime0
sweep        one row per grid value of a named parameter, with the Sharpe
             ratio and all sensitivities
figures      named presets (fig1, fig2-left, fig2-right, fig3-left,
             fig3-right, fig4) emitting the corresponding curve data
oracle-check closed-form fixture vs module outputs, one wide row of
             (quantity_fixture, quantity_module, quantity_err) triples

Exit codes: 0 success; 2 invalid config/arguments; 3 assumption violation
(arbitrage, degeneracy guard, boundary optimum, domain incompatibility);
4 numerical failure or unwritable output.

Output contract: CSV has a header row, '.'-decimal reals at 17 significant
digits, LF line endings, and trailing '# key=value' provenance lines (config
hash, package version); JSON is a column-oriented object with the same
provenance. Identical configs produce byte-identical files — nothing in the
pipeline is randomized, and sweep rows are aggregated by grid index, not by
completion order.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analytic_fixtures import FIXTURE_NAMES, Fixture, fixture
from .baseline_solver import (Payoff, ProblemSpec, butterfly_payoff, call_payoff,
                              davis_price, davis_price_via_root, make_payoff,
                              power_payoff, solve_baseline)
from .errors import ConfigError, NumericalFailure, RobustfolioError
from .measures import (StateSpace, WassersteinOrder, make_model, moments, normal)
from .robust_solver import (martingale_check_robust, robust_davis_price, robust_solve,
                            solve_delta_grid)
from .sensitivity import sensitivity_report, value_sensitivity, optimizer_sensitivity, \
    kl_value_sensitivity
from .utility import capped_exponential, exponential, log_shifted, make_utility

_NUMBER = {"type": "number"}
_BOUND = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
_INTERVAL = {"type": "array", "items": _BOUND, "minItems": 2, "maxItems": 2}
_GRID3 = {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3}
_POS_INT = {"type": "integer", "minimum": 2}

_MODEL_SCHEMA = {"oneOf": [
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "a"],
     "properties": {"kind": {"const": "binomial"}, "a": _NUMBER,
                    "state_space": _INTERVAL}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "mu", "sigma"],
     "properties": {"kind": {"const": "normal"}, "mu": _NUMBER, "sigma": _NUMBER,
                    "n_nodes": _POS_INT, "state_space": _INTERVAL}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "mu", "sigma"],
     "properties": {"kind": {"const": "shifted_lognormal"}, "mu": _NUMBER,
                    "sigma": _NUMBER, "n_nodes": _POS_INT, "state_space": _INTERVAL}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "mu", "sigma", "radius"],
     "properties": {"kind": {"const": "truncated_normal"}, "mu": _NUMBER,
                    "sigma": _NUMBER, "radius": _NUMBER, "n_nodes": _POS_INT,
                    "state_space": _INTERVAL}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "points", "weights"],
     "properties": {"kind": {"const": "explicit"},
                    "points": {"type": "array", "minItems": 1},
                    "weights": {"type": "array", "items": _NUMBER, "minItems": 1},
                    "state_space": _INTERVAL}},
]}

_UTILITY_SCHEMA = {"oneOf": [
    {"type": "object", "additionalProperties": False, "required": ["kind"],
     "properties": {"kind": {"const": "log_shifted"}, "w0": _NUMBER}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "gamma"],
     "properties": {"kind": {"const": "exponential"}, "gamma": _NUMBER}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "eta"],
     "properties": {"kind": {"const": "power"}, "eta": _NUMBER, "w0": _NUMBER}},
    {"type": "object", "additionalProperties": False,
     "required": ["kind", "gamma", "kappa"],
     "properties": {"kind": {"const": "capped_exponential"}, "gamma": _NUMBER,
                    "kappa": _NUMBER}},
]}

_PAYOFF_SCHEMA = {"oneOf": [
    {"type": "object", "additionalProperties": False, "required": ["kind", "k"],
     "properties": {"kind": {"const": "power"}, "k": {"type": "integer", "minimum": 1}}},
    {"type": "object", "additionalProperties": False, "required": ["kind"],
     "properties": {"kind": {"const": "call"}, "strike": _NUMBER, "smoothing": _NUMBER}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "K"],
     "properties": {"kind": {"const": "butterfly"}, "K": _NUMBER, "smoothing": _NUMBER}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "x0"],
     "properties": {"kind": {"const": "abs_shift"}, "x0": _NUMBER, "smoothing": _NUMBER}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "xs", "ys"],
     "properties": {"kind": {"const": "custom"},
                    "xs": {"type": "array", "items": _NUMBER, "minItems": 2},
                    "ys": {"type": "array", "items": _NUMBER, "minItems": 2}}},
]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "robustfolio run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": _MODEL_SCHEMA,
        "utility": _UTILITY_SCHEMA,
        "wasserstein_p": {"oneOf": [{"type": "number", "exclusiveMinimum": 1.0},
                                    {"const": "inf"}]},
        "action_space": _INTERVAL,
        "state_space": _INTERVAL,
        "payoff": _PAYOFF_SCHEMA,
        "delta": {"type": "number", "minimum": 0.0},
        "delta_grid": _GRID3,
        "sweep": {"type": "object", "additionalProperties": False,
                  "required": ["parameter", "grid"],
                  "properties": {"parameter": {"enum": ["a", "mu", "sigma",
                                                        "gamma", "kappa"]},
                                 "grid": _GRID3}},
        "fixture": {"type": "object", "additionalProperties": False,
                    "required": ["name"],
                    "properties": {"name": {"enum": list(FIXTURE_NAMES)},
                                   "params": {"type": "object"}}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"path": {"type": "string"},
                                  "format": {"enum": ["csv", "json"]}}},
        "solver": {"type": "object", "additionalProperties": False,
                   "properties": {"grid_points": {"type": "integer", "minimum": 64},
                                  "refinements": {"type": "integer", "minimum": 0},
                                  "root_bracket": {"type": "array", "items": _NUMBER,
                                                   "minItems": 2, "maxItems": 2}}},
    },
}

COMMANDS = ("solve", "sensitivity", "robust", "davis", "sweep", "figures", "oracle-check")
FIGURE_PRESETS = ("fig1", "fig2-left", "fig2-right", "fig3-left", "fig3-right", "fig4")


# ---------------------------------------------------------------------------
# Result table + emission
# ---------------------------------------------------------------------------

@dataclass
class ResultTable:
    """Rectangular numeric table with provenance; the single output shape."""

    columns: list[str]
    rows: list[list[float]]
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise NumericalFailure("ragged result table")


def _fmt_real(x: float) -> str:
    return "%.17g" % float(x)


def render(table: ResultTable, fmt: str = "csv") -> str:
    if fmt == "csv":
        lines = [",".join(table.columns)]
        lines += [",".join(_fmt_real(v) for v in row) for row in table.rows]
        lines += [f"# {k}={table.provenance[k]}" for k in sorted(table.provenance)]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        cols = {}
        for j, name in enumerate(table.columns):
            vals = [row[j] for row in table.rows]
            cols[name] = [None if not math.isfinite(v) else v for v in vals]
        doc = {"columns": cols, "column_order": table.columns,
               "provenance": table.provenance}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


def emit(table: ResultTable, fmt: str = "csv", path: str | None = None) -> str:
    """Render and (optionally) write; unwritable paths are a runtime failure
    (exit 4), not a config error."""
    text = render(table, fmt)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise NumericalFailure(f"cannot write {path}: {exc}") from exc
    return text


def read_result_csv(text: str) -> tuple[list[str], list[list[float]], dict[str, str]]:
    """Parse a table emitted by ``render(..., "csv")`` (round-trip helper)."""
    lines = [ln for ln in text.split("\n") if ln]
    provenance: dict[str, str] = {}
    data: list[list[float]] = []
    header: list[str] = []
    for i, ln in enumerate(lines):
        if ln.startswith("# "):
            key, _, value = ln[2:].partition("=")
            provenance[key] = value
        elif i == 0:
            header = ln.split(",")
        else:
            data.append([float(tok) for tok in ln.split(",")])
    return header, data, provenance


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from exc
    return cfg


def _bound(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _order_from(cfg: dict) -> WassersteinOrder:
    p_raw = cfg.get("wasserstein_p", "inf")
    return WassersteinOrder(math.inf if p_raw == "inf" else float(p_raw))


def build_spec(cfg: dict) -> ProblemSpec:
    if "model" not in cfg or "utility" not in cfg:
        raise ConfigError("config needs 'model' and 'utility' sections")
    model = make_model(cfg["model"])
    utility = make_utility(cfg["utility"])
    a_lo, a_hi = cfg.get("action_space", [-1000.0, 1000.0])
    action = StateSpace.interval(_bound(a_lo), _bound(a_hi))
    state = None
    if "state_space" in cfg:
        s_lo, s_hi = cfg["state_space"]
        state = StateSpace.interval(_bound(s_lo), _bound(s_hi))
    payoff = make_payoff(cfg["payoff"]) if "payoff" in cfg else None
    return ProblemSpec(model=model, utility=utility, action_space=action,
                       order=_order_from(cfg), payoff=payoff, state_space=state)


def _config_hash(cfg: dict, command: str, preset: str | None) -> dict[str, str]:
    digest = hashlib.sha256(
        json.dumps({"config": cfg, "command": command, "preset": preset},
                   sort_keys=True).encode()).hexdigest()
    out = {"config_sha256": digest, "command": command,
           "package_version": __version__}
    if preset:
        out["preset"] = preset
    return out


def _grid_values(grid) -> list[float]:
    start, stop, step = (float(g) for g in grid)
    if step <= 0.0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ConfigError("grid stop must be >= start")
    return [float(v) for v in np.arange(start, stop + step * 0.5, step)]


def _deltas_from(cfg: dict) -> list[float]:
    if "delta_grid" in cfg:
        values = _grid_values(cfg["delta_grid"])
    elif "delta" in cfg:
        values = [float(cfg["delta"])]
    else:
        raise ConfigError("robust command needs 'delta' or 'delta_grid'")
    if any(d < 0.0 for d in values):
        raise ConfigError("delta must be nonnegative")
    return values


_NAN = float("nan")


def _nz(value, fallback=_NAN) -> float:
    return fallback if value is None else float(value)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: dict) -> ResultTable:
    spec = build_spec(cfg)
    sol = solve_baseline(spec)
    columns = ["pi_star", "V0", "foc_residual", "boundary"]
    row = [sol.pi_star_scalar, sol.V0, float(np.linalg.norm(sol.foc_residual)),
           1.0 if sol.boundary else 0.0]
    if spec.payoff is not None:
        columns.append("davis_price")
        row.append(davis_price(spec, sol, spec.payoff))
    return ResultTable(columns, [row])


# branch tags encoded as reals (rows carry no strings): interior -> 0,
# pi_star_zero -> 1; documented here and in the README.
_BRANCH_CODE = {"interior": 0.0, "pi_star_zero": 1.0}


def cmd_sensitivity(cfg: dict) -> ResultTable:
    spec = build_spec(cfg)
    sol = solve_baseline(spec)
    report = sensitivity_report(spec, sol)
    columns = ["q", "V_prime0", "pi_prime0", "kappa_u", "branch",
               "kl_V_prime0", "davis_price", "davis_prime0"]
    row = [report.q, report.V_prime0, float(report.pi_prime0[0]), report.kappa_u,
           _BRANCH_CODE[report.branch], _nz(report.kl_V_prime0),
           _nz(report.davis_price), _nz(report.davis_prime0)]
    return ResultTable(columns, [row])


def cmd_robust(cfg: dict) -> ResultTable:
    spec = build_spec(cfg)
    deltas = _deltas_from(cfg)
    solutions = solve_delta_grid(spec, deltas)
    columns = ["delta", "V_delta", "pi_delta", "transport_cost",
               "martingale_residual", "davis_price_delta"]
    rows = []
    for sol in solutions:
        davis_delta = (robust_davis_price(spec, spec.payoff, sol.delta, sol)
                       if spec.payoff is not None else _NAN)
        rows.append([sol.delta, sol.V_delta, sol.pi_delta_scalar, sol.transport_cost,
                     martingale_check_robust(spec, sol), davis_delta])
    table = ResultTable(columns, rows)
    table.provenance["method"] = solutions[0].method if solutions else "none"
    return table


def cmd_davis(cfg: dict) -> ResultTable:
    spec = build_spec(cfg)
    if spec.payoff is None:
        raise ConfigError("davis command needs a payoff")
    sol = solve_baseline(spec)
    report = sensitivity_report(spec, sol)
    p_d = report.davis_price
    assert p_d is not None
    bracket = cfg.get("solver", {}).get("root_bracket")
    if bracket is None:
        if abs(p_d) < 1e-8:
            # the root construction has no sign change around a zero price
            root = _NAN
        else:
            bracket = (0.5 * p_d, 1.5 * p_d) if p_d > 0 else (1.5 * p_d, 0.5 * p_d)
            root = davis_price_via_root(spec, spec.payoff, bracket)
    else:
        root = davis_price_via_root(spec, spec.payoff, (float(bracket[0]),
                                                        float(bracket[1])))
    return ResultTable(["davis_price", "davis_price_root", "davis_prime0"],
                       [[p_d, root, _nz(report.davis_prime0)]])


_SWEEP_TARGETS = {"a": ("model", "a"), "mu": ("model", "mu"),
                  "sigma": ("model", "sigma"), "gamma": ("utility", "gamma"),
                  "kappa": ("utility", "kappa")}


def cmd_sweep(cfg: dict) -> ResultTable:
    sweep = cfg.get("sweep")
    if not sweep:
        raise ConfigError("sweep command needs a 'sweep' section")
    parameter = sweep["parameter"]
    section, key = _SWEEP_TARGETS[parameter]
    values = _grid_values(sweep["grid"])

    def run_one(value: float) -> list[float]:
        local = copy.deepcopy(cfg)
        local.setdefault(section, {})[key] = value
        spec = build_spec(local)
        sol = solve_baseline(spec)
        report = sensitivity_report(spec, sol)
        _, _, sharpe = moments(spec.model)
        return [value, _nz(sharpe), sol.pi_star_scalar, sol.V0, report.V_prime0,
                report.kappa_u, float(report.pi_prime0[0]), _nz(report.kl_V_prime0),
                _nz(report.davis_price), _nz(report.davis_prime0)]

    with concurrent.futures.ThreadPoolExecutor(
            max_workers=min(8, max(1, len(values)))) as pool:
        rows = list(pool.map(run_one, values))  # ordered by grid index
    columns = [parameter, "sharpe", "pi_star", "V0", "V_prime0", "kappa_u",
               "pi_prime0", "kl_V_prime0", "davis_price", "davis_prime0"]
    return ResultTable(columns, rows)


def cmd_oracle_check(cfg: dict) -> ResultTable:
    fx_cfg = cfg.get("fixture")
    if not fx_cfg:
        raise ConfigError("oracle-check needs a 'fixture' section")
    fx = fixture(fx_cfg["name"], **fx_cfg.get("params", {}))
    triples = _fixture_deviations(fx)
    columns: list[str] = []
    row: list[float] = []
    for name, fixture_value, module_value in triples:
        columns += [f"{name}_fixture", f"{name}_module", f"{name}_err"]
        row += [fixture_value, module_value, abs(fixture_value - module_value)]
    table = ResultTable(columns, [row])
    table.provenance["fixture"] = fx.name
    return table


def _p_for_q(q: float) -> float:
    return math.inf if q == 1.0 else q / (q - 1.0)


def _fixture_deviations(fx: Fixture) -> list[tuple[str, float, float]]:
    """(quantity, fixture value, module value) triples for one fixture."""
    out: list[tuple[str, float, float]] = []
    params = fx.params
    if fx.name == "binomial_log":
        q = params["q"]
        spec = ProblemSpec(model=make_model({"kind": "binomial", "a": params["a"]}),
                           utility=log_shifted(1.0),
                           action_space=StateSpace.interval(-0.95, 0.95),
                           order=WassersteinOrder(_p_for_q(q)))
        sol = solve_baseline(spec)
        pi_prime, _ = optimizer_sensitivity(spec, sol)
        out += [("pi_star", fx.pi_star, sol.pi_star_scalar),
                ("V0", fx.V0, sol.V0),
                ("value_prime0", fx.value_prime0, value_sensitivity(spec, sol)),
                ("pi_prime0", fx.pi_prime0, float(pi_prime[0])),
                ("kl_prime0", fx.kl_prime0, kl_value_sensitivity(spec, sol))]
        if q == 1.0:
            payoffs = {"power3": power_payoff(3), "call0": call_payoff(0.0)}
            for label, payoff in payoffs.items():
                out.append((f"davis_price_{label}", fx.davis_price0[label],
                            davis_price(spec, sol, payoff)))
                curve = fx.price_curves[label]
                out.append((f"davis_curve_{label}_d01", curve(0.1),
                            robust_davis_price(spec, payoff, 0.1)))
    elif fx.name == "binomial_exp":
        q = params["q"]
        spec = ProblemSpec(model=make_model({"kind": "binomial", "a": params["a"]}),
                           utility=exponential(params["gamma"]),
                           action_space=StateSpace.interval(-10.0, 10.0),
                           order=WassersteinOrder(_p_for_q(q)))
        sol = solve_baseline(spec)
        out += [("pi_star", fx.pi_star, sol.pi_star_scalar),
                ("V0", fx.V0, sol.V0),
                ("value_prime0", fx.value_prime0, value_sensitivity(spec, sol)),
                ("kl_prime0", fx.kl_prime0, kl_value_sensitivity(spec, sol))]
    elif fx.name == "normal_exp":
        spec = ProblemSpec(model=normal(params["mu"], params["sigma"]),
                           utility=exponential(params["gamma"]),
                           action_space=StateSpace.interval(-1000.0, 1000.0),
                           order=WassersteinOrder(math.inf))
        sol = solve_baseline(spec)
        pi_prime, _ = optimizer_sensitivity(spec, sol)
        payoff = power_payoff(2)
        out += [("pi_star", fx.pi_star, sol.pi_star_scalar),
                ("V0", fx.V0, sol.V0),
                ("value_prime0", fx.value_prime0, value_sensitivity(spec, sol)),
                ("pi_prime0", fx.pi_prime0, float(pi_prime[0])),
                ("davis_price_power2", fx.davis_price0["power2"],
                 davis_price(spec, sol, payoff))]
        for d in (0.02, 0.05, 0.1):
            rs = robust_solve(spec, d)
            tag = f"{d:g}".replace(".", "p")
            out += [(f"V_delta_{tag}", fx.value_curve(d), rs.V_delta),
                    (f"pi_delta_{tag}", fx.pi_curve(d), rs.pi_delta_scalar),
                    (f"davis_curve_power2_{tag}", fx.price_curves["power2"](d),
                     robust_davis_price(spec, payoff, d, rs))]
    elif fx.name == "capped_exp_limit":
        # module at a small cap parameter vs the kappa -> 0 closed-form limits
        kappa = 0.01
        q = params["q"]
        spec = ProblemSpec(model=normal(params["mu"], params["sigma"]),
                           utility=capped_exponential(params["gamma"], kappa),
                           action_space=StateSpace.interval(-1000.0, 1000.0),
                           order=WassersteinOrder(_p_for_q(q)))
        sol = solve_baseline(spec)
        pi_prime, _ = optimizer_sensitivity(spec, sol)
        out += [("value_prime0", fx.value_prime0, value_sensitivity(spec, sol)),
                ("pi_prime0", fx.pi_prime0, float(pi_prime[0])),
                ("pi_prime0_variant", fx.pi_prime0_variant, float(pi_prime[0]))]
    elif fx.name == "lognormal_butterfly":
        payoff = butterfly_payoff(params["K"])
        spec = ProblemSpec(model=make_model({"kind": "shifted_lognormal",
                                             "mu": params["mu"],
                                             "sigma": params["sigma"]}),
                           utility=log_shifted(1.0),
                           action_space=StateSpace.interval(0.0, 1.0),
                           order=WassersteinOrder(math.inf), payoff=payoff)
        sol = solve_baseline(spec)
        report = sensitivity_report(spec, sol, payoff)
        out.append(("davis_prime0", fx.davis_prime0["butterfly"],
                    _nz(report.davis_prime0)))
        for d in (0.0, 0.05, 0.1):
            tag = f"{d:g}".replace(".", "p")
            out.append((f"davis_curve_{tag}", fx.price_curves["butterfly"](d),
                        robust_davis_price(spec, payoff, d)))
    else:  # pragma: no cover - catalog and dispatch kept in sync
        raise ConfigError(f"no oracle check wired for fixture {fx.name!r}")
    return [(n, float(a), float(b)) for n, a, b in out]


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

_A_GRID_COARSE = [round(0.05 * k, 10) for k in range(1, 10)]  # 0.05 .. 0.45
_A_GRID_TAIL = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6]
_A_GRID_FULL = sorted(_A_GRID_TAIL + _A_GRID_COARSE)


def _binomial_spec(a: float, utility, q: float) -> ProblemSpec:
    return ProblemSpec(model=make_model({"kind": "binomial", "a": a}),
                       utility=utility,
                       action_space=StateSpace.interval(-50.0, 50.0),
                       order=WassersteinOrder(_p_for_q(q)))


def _binomial_sharpe(a: float) -> float:
    return (1.0 - 2.0 * a) / (2.0 * math.sqrt(a * (1.0 - a)))


def _fig1() -> ResultTable:
    sigma, gamma = 0.2, 1.0
    rows = []
    for k in range(1, 31):
        mu = 0.02 * k
        spec = ProblemSpec(model=normal(mu, sigma),
                           utility=exponential(gamma),
                           action_space=StateSpace.interval(-1000.0, 1000.0),
                           order=WassersteinOrder(math.inf))
        v_prime = value_sensitivity(spec, solve_baseline(spec))
        rows.append([mu, mu / sigma, v_prime, abs(v_prime)])
    return ResultTable(["mu", "sharpe", "V_prime0", "magnitude"], rows)


def _fig2(utility_factory, q_list: list[float], labels: list[str]) -> ResultTable:
    rows = []
    for a in _A_GRID_FULL:
        row = [a, _binomial_sharpe(a)]
        for q in q_list:
            spec = _binomial_spec(a, utility_factory(), q)
            row.append(value_sensitivity(spec, solve_baseline(spec)))
        spec = _binomial_spec(a, utility_factory(), 1.0)
        row.append(kl_value_sensitivity(spec, solve_baseline(spec)))
        rows.append(row)
    return ResultTable(["a", "sharpe"] + labels + ["kl_V_prime0"], rows)


def _fig3(utility_factory) -> ResultTable:
    rows = []
    for a in _A_GRID_COARSE:
        row = [a, _binomial_sharpe(a)]
        for q in (1.0, 2.0, 3.0):
            spec = _binomial_spec(a, utility_factory(), q)
            pi_prime, _ = optimizer_sensitivity(spec, solve_baseline(spec))
            row.append(float(pi_prime[0]))
        rows.append(row)
    return ResultTable(["a", "sharpe", "pi_prime0_q1", "pi_prime0_q2",
                        "pi_prime0_q3"], rows)


def _fig4() -> ResultTable:
    mu, sigma, gamma, q = 0.1, 0.2, 1.0, 2.0
    fx = fixture("capped_exp_limit", mu=mu, sigma=sigma, gamma=gamma, q=q)
    rows = []
    for kappa in (1.0, 0.3, 0.1, 0.03, 0.01):
        spec = ProblemSpec(model=normal(mu, sigma),
                           utility=capped_exponential(gamma, kappa),
                           action_space=StateSpace.interval(-1000.0, 1000.0),
                           order=WassersteinOrder(_p_for_q(q)))
        sol = solve_baseline(spec)
        pi_prime, _ = optimizer_sensitivity(spec, sol)
        rows.append([kappa, value_sensitivity(spec, sol), fx.value_prime0,
                     float(pi_prime[0]), fx.pi_prime0, fx.pi_prime0_variant])
    return ResultTable(["kappa", "V_prime0", "V_prime0_limit", "pi_prime0",
                        "pi_prime0_limit", "pi_prime0_variant"], rows)


def cmd_figures(preset: str) -> ResultTable:
    if preset == "fig1":
        return _fig1()
    if preset == "fig2-left":
        return _fig2(lambda: log_shifted(1.0), [1.0, 1.5, 2.0, 3.0],
                     ["V_prime0_q1", "V_prime0_q1_5", "V_prime0_q2", "V_prime0_q3"])
    if preset == "fig2-right":
        # orders inf, 4, 2.5 -> conjugates 1, 4/3, 5/3
        return _fig2(lambda: exponential(1.0), [1.0, 4.0 / 3.0, 5.0 / 3.0],
                     ["V_prime0_pinf", "V_prime0_p4", "V_prime0_p2_5"])
    if preset == "fig3-left":
        return _fig3(lambda: log_shifted(1.0))
    if preset == "fig3-right":
        return _fig3(lambda: exponential(1.0))
    if preset == "fig4":
        return _fig4()
    raise ConfigError(f"unknown figure preset {preset!r}; "
                      f"known: {', '.join(FIGURE_PRESETS)}")


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parse_grid_token(token: str) -> list[float]:
    parts = token.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:step, got {token!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad grid {token!r}: {exc}") from exc


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(cfg)


def run(command: str, cfg: dict, preset: str | None = None) -> ResultTable:
    """Dispatch one command on a validated config; returns the table."""
    if command == "solve":
        table = cmd_solve(cfg)
    elif command == "sensitivity":
        table = cmd_sensitivity(cfg)
    elif command == "robust":
        table = cmd_robust(cfg)
    elif command == "davis":
        table = cmd_davis(cfg)
    elif command == "sweep":
        table = cmd_sweep(cfg)
    elif command == "figures":
        if not preset:
            raise ConfigError("figures needs a preset argument "
                              f"({', '.join(FIGURE_PRESETS)})")
        table = cmd_figures(preset)
    elif command == "oracle-check":
        table = cmd_oracle_check(cfg)
    else:
        raise ConfigError(f"unknown command {command!r}")
    table.provenance.update(_config_hash(cfg, command, preset))
    return table


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="robustfolio",
        description="Wasserstein-robust expected utility: solve, first-order "
                    "sensitivities, worst-case pricing, figure data.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("preset", nargs="?", default=None,
                        help="figure preset (figures command only)")
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--format", choices=["csv", "json"], default=None)
    parser.add_argument("--delta", type=float, default=None,
                        help="single robustness radius (overrides config)")
    parser.add_argument("--delta-grid", default=None, metavar="A:B:STEP",
                        help="radius grid (overrides config)")
    parser.add_argument("--sweep", default=None, metavar="PARAM=A:B:STEP",
                        help="sweep specification (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.command != "figures" and args.config is None:
            raise ConfigError(f"command {args.command!r} needs --config")
        if args.delta is not None:
            if args.delta < 0.0:
                raise ConfigError(f"delta must be nonnegative, got {args.delta}")
            cfg["delta"] = args.delta
            cfg.pop("delta_grid", None)
        if args.delta_grid is not None:
            cfg["delta_grid"] = _parse_grid_token(args.delta_grid)
            cfg.pop("delta", None)
        if args.sweep is not None:
            param, _, grid = args.sweep.partition("=")
            if param not in _SWEEP_TARGETS:
                raise ConfigError(f"unknown sweep parameter {param!r}")
            cfg["sweep"] = {"parameter": param, "grid": _parse_grid_token(grid)}
        validate_config(cfg)
        table = run(args.command, cfg, args.preset)
        fmt = args.format or cfg.get("output", {}).get("format", "csv")
        path = args.out or cfg.get("output", {}).get("path")
        text = emit(table, fmt, path)
        if path is None:
            sys.stdout.write(text)
        return 0
    except RobustfolioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
