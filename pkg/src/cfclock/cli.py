"""Command-line runner: resolves a flat configuration, dispatches, and writes JSON or CSV reports.

Configuration precedence is flags > ``--config`` file > built-in defaults.
Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import acceptance
from . import engineered as eng
from .cones import ConeError, EnumerationError
from .ontic import MODES, BudgetError, build_scenario, deterministic_basis_model, find_witness, verify_statistics_reproduction
from .protocol import ClockSpec, counterfactual_probabilities, run_forward, verify_counterfactual_outcome
from .quantum import tick
from .synth import no_ancilla_search, random_request, synth_um_general, um_nt1_canonical, validate_um_structure
from .tsvf import TwoStateQuery, amplitude_decomposition, backward_state, pre_post_amplitude, prob_on_at

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4
COMMANDS = ("simulate", "synth", "tsvf", "ontic", "engineered", "all-acceptance")
FORMATS = ("json", "csv")
S_ZERO_TOL = 1e-12

# key -> (parser, default)
_KEYS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "nt": (int, 1),
    "theta": (float, None),
    "sigma": (float, None),
    "x0": (int, 1),
    "t1": (float, 1.0),
    "mode": (str, "counterfactual"),
    "trials": (int, 10_000),
    "seed": (int, 0),
    "out": (str, None),
    "format": (str, "json"),
    "canonical": (None, False),
    "synth": (None, False),
}


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    out: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lstrip("_")
        if key not in _KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        conv = _KEYS[key][0]
        try:
            out[key] = _parse_bool(val) if conv is None else conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {val!r}") from exc
    return out


def resolve_config(command: str, flags: dict, file_values: dict | None = None) -> dict:
    cfg = {k: d for k, (_, d) in _KEYS.items()}
    cfg.update(file_values or {})
    cfg.update({k: v for k, v in flags.items() if v is not None and k in _KEYS})
    cfg["command"] = command
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["nt"] < 1:
        raise ConfigError("nt must be at least 1")
    if cfg["canonical"] and cfg["nt"] != 1:
        raise ConfigError("the canonical clock has nt = 1")
    if cfg["canonical"] and cfg["synth"]:
        raise ConfigError("choose one of canonical and synth")
    if cfg["theta"] is not None and not math.isfinite(cfg["theta"]):
        raise ConfigError("theta must be finite")
    if cfg["sigma"] is not None and not cfg["sigma"] > 0:
        raise ConfigError("sigma must be positive")
    if cfg["x0"] < 1:
        raise ConfigError("x0 must be at least 1")
    if not cfg["t1"] > 0:
        raise ConfigError("t1 must be positive")
    mode = cfg["mode"].lower().replace("_", "-")
    cfg["mode"] = "on-only" if mode == "ononly" else mode
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if cfg["trials"] < 1:
        raise ConfigError("trials must be at least 1")
    if cfg["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")


# Serialization


def _plain(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def _dump(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list)) for x in obj):
            return "[" + ", ".join(_dump(x) for x in obj) + "]"
        return "[\n" + ",\n".join(inner + _dump(x, indent + 1) for x in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(report: dict) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    return _dump(_plain(report)) + "\n"


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in _plain(r).items()})
    return buf.getvalue()


# Commands


def _clock_spec(cfg: dict, warnings: list[str]) -> tuple[ClockSpec, dict]:
    theta = cfg["theta"]
    if cfg["canonical"] or (cfg["nt"] == 1 and not cfg["synth"]):
        spec = um_nt1_canonical()
        if theta is not None:
            spec = spec.with_theta(theta)
        return spec, {"source": "canonical"}
    r = None
    if theta is not None and abs(math.sin(theta)) > S_ZERO_TOL:
        r = math.cos(theta) / math.sin(theta)
    req = random_request(cfg["nt"], cfg["seed"], r)
    spec, gamma = synth_um_general(req)
    if theta is not None and r is None:
        warnings.append("s = 0: synthesized with a seed-drawn ratio, then run at theta")
        spec = spec.with_theta(theta)
    info = {"source": "synthesized", "gamma": gamma, "tilde_A": list(req.tilde_A), "r": req.r}
    return spec, info


def _spec_summary(spec: ClockSpec, info: dict) -> dict:
    return {"n_ticks": spec.n_ticks, "m": spec.m, "theta": spec.theta, "c": spec.c, "s": spec.s, **info}


def cmd_simulate(cfg: dict) -> dict:
    warnings: list[str] = []
    spec, info = _clock_spec(cfg, warnings)
    s_zero = abs(spec.s) < S_ZERO_TOL
    if s_zero:
        warnings.append("s = 0: the counterfactual conditions divide by s; verdicts suppressed")
    runs, rows = [], []
    for l in range(spec.n_ticks + 1):
        res = run_forward(spec, l)
        probs = {k: v for k, v in res.distribution.probs.items() if k != "rest"}
        runs.append({"elapsed": str(tick(l)), "distribution": probs})
        for lab, p in probs.items():
            verdict = "" if s_zero else str(res.interpretation[lab])
            rows.append({"elapsed": str(tick(l)), "outcome": lab, "probability": p, "verdict": verdict})
    outcomes = []
    pcf = counterfactual_probabilities(spec)
    for k, lab in enumerate(spec.outcome_labels()):
        entry = {"index": k, "outcome": str(lab), "P_cf": pcf[k]}
        if s_zero:
            entry.update(verified=None, residuals=None)
        else:
            ok, res = verify_counterfactual_outcome(spec, k)
            entry.update(verified=ok, residuals=res)
        outcomes.append(entry)
    verdicts = None
    if not s_zero:
        verdicts = {str(lab): str(v) for lab, v in run_forward(spec, 0).interpretation.items()}
    return {
        "spec": _spec_summary(spec, info),
        "warnings": warnings,
        "runs": runs,
        "counterfactual_outcomes": outcomes,
        "verdicts": verdicts,
        "rows": rows,
    }


def cmd_synth(cfg: dict) -> dict:
    warnings: list[str] = []
    spec, info = _clock_spec({**cfg, "synth": not cfg["canonical"]}, warnings)
    r = spec.c / spec.s if abs(spec.s) > S_ZERO_TOL else float("nan")
    rep = validate_um_structure(spec.um, spec.n_ticks, spec.m, r, tilde_A=info.get("tilde_A"))
    pcf = counterfactual_probabilities(spec)
    rows = [{"index": k, "outcome": str(lab), "P_cf": pcf[k]} for k, lab in enumerate(spec.outcome_labels())]
    return {
        "spec": _spec_summary(spec, info),
        "warnings": warnings,
        "structure": {"pattern_ok": rep.pattern_ok, "gamma": rep.gamma, "residuals": rep.residuals},
        "P_cf": pcf,
        "P_cf_total": float(np.sum(pcf)),
        "no_ancilla": {"trials": cfg["trials"], "max_min_probability": no_ancilla_search(cfg["trials"], cfg["seed"])},
        "um": {"re": spec.um.matrix.real, "im": spec.um.matrix.imag},
        "rows": rows,
    }


def cmd_tsvf(cfg: dict) -> dict:
    warnings: list[str] = []
    spec, info = _clock_spec(cfg, warnings)
    outcomes, rows = [], []
    for k, lab in enumerate(spec.outcome_labels()):
        back = backward_state(spec, k)
        off, on = amplitude_decomposition(spec, k)
        grid = []
        for u in acceptance.U_GRID:
            p = prob_on_at(TwoStateQuery(spec, k, float(u)))
            grid.append(p)
            rows.append({"index": k, "outcome": str(lab), "u": float(u), "prob_on": p})
        outcomes.append(
            {
                "index": k,
                "outcome": str(lab),
                "backward_state": {key: val for key, val in back.as_dict().items() if abs(val) > 0},
                "amplitude": pre_post_amplitude(spec, k),
                "off_branch": off,
                "on_branch": on,
                "prob_on": grid,
            }
        )
    return {"spec": _spec_summary(spec, info), "warnings": warnings, "outcomes": outcomes, "rows": rows}


def cmd_ontic(cfg: dict) -> dict:
    warnings: list[str] = []
    spec, info = _clock_spec(cfg, warnings)
    scen = build_scenario(spec, cfg["mode"])
    rep = find_witness(scen)
    out = {
        "spec": _spec_summary(spec, info),
        "mode": cfg["mode"],
        "experimental": info["source"] != "canonical",
        "model_exists": rep.model_exists,
        "violation": rep.violation,
        "numeric_floor": rep.numeric_floor,
        "counts": rep.counts,
        "witness": rep.witness,
        "certificate_residual": rep.certificate_residual,
    }
    if cfg["mode"] == "on-only":
        mu, xi = deterministic_basis_model(scen)
        out["deterministic_model_deviation"] = verify_statistics_reproduction(scen, mu, xi)
    out["rows"] = [{k: out[k] for k in ("mode", "model_exists", "violation", "numeric_floor")}]
    return out


def cmd_engineered(cfg: dict) -> dict:
    sigmas = [cfg["sigma"]] if cfg["sigma"] is not None else [t[0] for t in acceptance.ENGINEERED_TARGETS]
    published = {t[0]: {"P_cf_total": t[1], "Dif1": t[2], "Dif2": t[3]} for t in acceptance.ENGINEERED_TARGETS}
    rows, table = [], []
    for sigma in sigmas:
        row = eng.engineered_row(sigma, n_ticks=cfg["nt"], x0=cfg["x0"], t1=cfg["t1"])
        rows.append(row)
        entry = dict(row)
        if cfg["nt"] == 1 and cfg["x0"] == 1 and sigma in published:
            entry["published"] = published[sigma]
        table.append(entry)
    return {"table": table, "rows": rows}


def cmd_acceptance(cfg: dict, only=None) -> dict:
    results = acceptance.run_all(only)
    for r in results:
        print(r.line(), flush=True)
    return {
        "all_passed": all(r.passed for r in results),
        "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "details": r.details} for r in results],
        "rows": [{"number": r.number, "title": r.title, "passed": r.passed} for r in results],
    }


_DISPATCH = {
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "tsvf": cmd_tsvf,
    "ontic": cmd_ontic,
    "engineered": cmd_engineered,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--nt", type=int, help="number of tick times minus one (N_T)")
    common.add_argument("--theta", type=float, help="mixing angle of the off/on rotation")
    common.add_argument("--sigma", type=float, help="smoothing width of the engineered clock")
    common.add_argument("--x0", type=int, help="cycle length of the engineered clock")
    common.add_argument("--t1", type=float, help="tick window width of the engineered clock")
    common.add_argument("--mode", help="ontic scenario: on-only or counterfactual")
    common.add_argument("--trials", type=int, help="no-ancilla search trials")
    common.add_argument("--seed", type=int, help="seed for synthesized clocks and searches")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", help="json or csv")
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--canonical", action="store_const", const=True, help="use the one-tick canonical clock")
    common.add_argument("--synth", action="store_const", const=True, help="use a synthesized clock")
    p = argparse.ArgumentParser(prog="cfclock", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "all-acceptance":
            sp.add_argument("--only", type=int, nargs="+", help="run only these criterion numbers")
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k in _KEYS}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, flags, file_values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "all-acceptance":
            result = cmd_acceptance(cfg, args.only)
        else:
            result = _DISPATCH[args.command](cfg)
    except (BudgetError, ConeError, EnumerationError, eng.QuadratureError, ArithmeticError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in result.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    rows = result.pop("rows", [])
    if cfg["format"] == "csv":
        text = to_csv(rows)
    else:
        text = to_json({"schema": SCHEMA, "command": args.command, "config": cfg, "result": result})
    if cfg["out"] or args.command != "all-acceptance":
        _emit(text, cfg["out"])
    if args.command == "all-acceptance" and not result["all_passed"]:
        return EXIT_ACCEPTANCE
    return EXIT_OK
