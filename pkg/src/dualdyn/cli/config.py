"""Scenario configuration: INI-style documents with a ``[run]`` and a ``[parameters]`` section.

Example::

    [run]
    scenario = epr-chsh
    seed = 7
    format = csv

    [parameters]
    a = 0
    a_prime = deg:90
    b = deg:45
    b_prime = deg:135

Angles are radians; a ``deg:`` prefix converts degrees at parse time.
Validation reports every problem found, each tagged with its key path.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from ..errors import ConfigError

SEED_MAX = 2**64 - 1


class ConfigValidationError(ConfigError):
    def __init__(self, problems: List[Tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {m}" for k, m in problems))


def parse_angle(text: str) -> float:
    text = text.strip()
    if text.lower().startswith("deg:"):
        val = math.radians(float(text[4:]))
    else:
        val = float(text)
    if not math.isfinite(val):
        raise ValueError("angle must be finite")
    return val


def _list(conv):
    def parse(text: str):
        items = [x for x in (s.strip() for s in text.split(",")) if x]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)

    return parse


def _finite_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError("must be an integer")
    return int(v)


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    check: Optional[Callable[[Any], Optional[str]]] = None
    choices: Tuple[str, ...] = ()


def positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    return None if all(x > 0 for x in vals) else "must be > 0"


def at_least(n):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        return None if all(x >= n for x in vals) else f"must be >= {n}"

    return check


FLOAT = _finite_float
ANGLE = parse_angle
ANGLES = _list(parse_angle)
FLOATS = _list(_finite_float)
INTS = _list(_int)
WORDS = _list(str)

_OU = {
    "n": Param(_int, 512, check=at_least(3)),
    "lower": Param(FLOAT, -8.0),
    "upper": Param(FLOAT, 8.0),
    "dt": Param(FLOAT, 1e-3, check=positive),
    "horizon": Param(FLOAT, 1.0, check=positive),
    "mean0": Param(FLOAT, 2.0),
    "var0": Param(FLOAT, 0.25, check=positive),
    "theta": Param(FLOAT, 1.0, check=positive),
    "sigma": Param(FLOAT, math.sqrt(2.0), check=positive),
    "scheme": Param(str, "crank-nicolson", choices=("crank-nicolson", "explicit-euler")),
}

_CHSH_ANGLES = {
    "a": Param(ANGLE, 0.0),
    "a_prime": Param(ANGLE, math.pi / 2),
    "b": Param(ANGLE, math.pi / 4),
    "b_prime": Param(ANGLE, 3 * math.pi / 4),
}

_METHOD = Param(str, "quadrature", choices=("quadrature", "monte-carlo"))

SCENARIOS: Dict[str, Dict[str, Param]] = {
    "ou-oracle": dict(_OU),
    "conjugation": {
        **_OU,
        "observables": Param(WORDS, ("y", "y2", "cos")),
        "resolutions": Param(INTS, (128, 256, 512), check=at_least(3)),
    },
    "chameleon-averages": {
        **{k: _OU[k] for k in ("n", "lower", "upper", "dt", "horizon", "mean0", "var0", "sigma")},
        "thetas": Param(FLOATS, (1.0, 2.0), check=positive),
        "alice_angles": Param(ANGLES, (0.0, math.pi / 2)),
        "bob_angles": Param(ANGLES, (math.pi / 4, 3 * math.pi / 4)),
        "cells": Param(_int, 360, check=at_least(360)),
    },
    "epr-correlation": {
        "model": Param(str, "r1", choices=("r1", "r2")),
        "angles_a": Param(ANGLES, required=True),
        "angles_b": Param(ANGLES, required=True),
        "method": _METHOD,
        "mc_count": Param(_int, 1_000_000, check=at_least(2)),
        "cells": Param(_int, 360, check=at_least(360)),
    },
    "epr-chsh": {
        **_CHSH_ANGLES,
        "model": Param(str, "r1", choices=("r1", "r2")),
        "method": _METHOD,
        "mc_count": Param(_int, 1_000_000, check=at_least(2)),
        "cells": Param(_int, 360, check=at_least(360)),
    },
    "loophole": {
        **_CHSH_ANGLES,
        "detection": Param(str, "default", choices=("default", "lossless")),
        "pairs": Param(_int, 1_000_000, check=at_least(1)),
    },
    "fair-sampling": {
        "detection": Param(str, "default", choices=("default", "lossless")),
        "pair1": Param(ANGLES, (0.0, math.pi / 4)),
        "pair2": Param(ANGLES, (math.pi / 2, math.pi / 4)),
        "cells": Param(_int, 3600, check=at_least(2)),
    },
}


def seed_required(scenario: str, params: Mapping[str, Any]) -> bool:
    if scenario == "loophole":
        return True
    return params.get("method") == "monte-carlo"


RUN_KEYS = ("scenario", "seed", "format", "output")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: Dict[str, Any]
    seed: Optional[int] = None
    format: str = "csv"
    output: str = ""
    raw: Dict[str, Dict[str, str]] = field(default_factory=dict)

    @property
    def stem(self) -> str:
        return self.output or self.scenario

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = {k: dict(v) for k, v in self.raw.items()}
        raw.setdefault("run", {})["seed"] = str(seed)
        return ScenarioConfig(self.scenario, dict(self.params), seed, self.format, self.output, raw)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document, collecting every problem."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigValidationError([("<document>", str(exc).splitlines()[0])]) from None
    raw = {s: dict(cp[s]) for s in cp.sections()}
    return validate(raw)


def validate(raw: Mapping[str, Mapping[str, str]]) -> ScenarioConfig:
    problems: List[Tuple[str, str]] = []
    for sec in raw:
        if sec not in ("run", "parameters"):
            problems.append((sec, "unknown section"))
    run = dict(raw.get("run", {}))
    given = dict(raw.get("parameters", {}))
    if "run" not in raw:
        problems.append(("run", "missing section"))
    for k in run:
        if k not in RUN_KEYS:
            problems.append((f"run.{k}", "unknown key"))

    scenario = run.get("scenario", "").strip()
    schema = SCENARIOS.get(scenario)
    if not scenario:
        problems.append(("run.scenario", "missing key"))
    elif schema is None:
        problems.append(("run.scenario", f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}"))

    fmt = run.get("format", "csv").strip()
    if fmt not in ("csv", "json"):
        problems.append(("run.format", f"must be csv or json, got {fmt!r}"))
    output = run.get("output", "").strip()
    if output and ("/" in output or "\\" in output or output in (".", "..")):
        problems.append(("run.output", "must be a plain file stem"))

    params: Dict[str, Any] = {}
    if schema is not None:
        for k in given:
            if k not in schema:
                problems.append((f"parameters.{k}", "unknown key"))
        for k, spec in schema.items():
            path = f"parameters.{k}"
            if k not in given:
                if spec.required:
                    problems.append((path, "missing key"))
                else:
                    params[k] = spec.default
                continue
            text = given[k].strip()
            if spec.choices:
                if text not in spec.choices:
                    problems.append((path, f"must be one of {list(spec.choices)}, got {text!r}"))
                    continue
                params[k] = text
                continue
            try:
                val = spec.parse(text)
            except (TypeError, ValueError) as exc:
                problems.append((path, f"cannot parse {text!r}: {exc}"))
                continue
            msg = spec.check(val) if spec.check else None
            if msg:
                problems.append((path, msg))
                continue
            params[k] = val
        problems += _cross_checks(scenario, params)

    seed: Optional[int] = None
    if "seed" in run:
        try:
            seed = _int(run["seed"])
            if not 0 <= seed <= SEED_MAX:
                problems.append(("run.seed", "must be a 64-bit unsigned integer"))
        except ValueError as exc:
            problems.append(("run.seed", f"cannot parse {run['seed']!r}: {exc}"))
    elif schema is not None and seed_required(scenario, params):
        problems.append(("run.seed", "missing key: seed is required for monte-carlo scenarios"))

    if problems:
        raise ConfigValidationError(problems)
    norm_raw = {"run": {k: str(v) for k, v in run.items()}, "parameters": {k: str(v) for k, v in given.items()}}
    return ScenarioConfig(scenario, params, seed, fmt, output, norm_raw)


def _cross_checks(scenario: str, p: Mapping[str, Any]) -> List[Tuple[str, str]]:
    out = []
    if "lower" in p and "upper" in p and p["lower"] >= p["upper"]:
        out.append(("parameters.upper", "must exceed parameters.lower"))
    if scenario == "epr-correlation" and "angles_a" in p and "angles_b" in p:
        if len(p["angles_a"]) != len(p["angles_b"]):
            out.append(("parameters.angles_b", "must have as many entries as parameters.angles_a"))
    if scenario == "fair-sampling":
        for k in ("pair1", "pair2"):
            if k in p and len(p[k]) != 2:
                out.append((f"parameters.{k}", "must be two angles"))
    if scenario == "conjugation" and "observables" in p:
        bad = [o for o in p["observables"] if o not in ("y", "y2", "cos")]
        if bad:
            out.append(("parameters.observables", f"unknown observables {bad}; use y, y2, cos"))
    return out
