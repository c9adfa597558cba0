"""Experiment configuration: a line-based ``key = value`` format and its schema.

One schema drives config-file parsing, command-line flags and ``--help`` text.
Every violation found is reported, each tagged with its category.

Example::

    subcommand = invariance
    seed = 7
    N = 32
    t = 0.3, 1.7, -2.5
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .harness import builtin_functionals
from .measures import AmplitudeSequence, RadialLaw
from .renorm import renorm_violations

SUBCOMMANDS = ("flow", "sample", "tailmass", "renorm", "invariance", "weakconv", "gibbs")
STOCHASTIC = ("sample", "renorm", "invariance", "weakconv", "gibbs")
FUNCTIONAL_IDS = tuple(f.id for f in builtin_functionals())
_ALL = SUBCOMMANDS
_LAW_USERS = ("flow", "sample", "tailmass", "renorm", "invariance", "weakconv")
_AMPS_USERS = ("flow", "sample", "tailmass", "invariance", "weakconv")


@dataclass(frozen=True)
class Field:
    name: str
    kind: str                      # int, float, bool, str, path, int_list, float_list, str_list
    help: str
    subcommands: tuple
    default: Any = None            # a value, or a dict keyed by subcommand
    choices: tuple | None = None
    flags: dict = field(default_factory=dict)   # subcommand -> flag, when not --<name>

    def default_for(self, sub: str):
        if isinstance(self.default, dict):
            return self.default.get(sub)
        return self.default

    def flag_for(self, sub: str) -> str:
        return self.flags.get(sub, "--" + self.name.replace("_", "-"))


SCHEMA = (
    Field("seed", "int", "master seed of the counter-based random stream", _ALL),
    Field("workers", "int", "worker threads; results do not depend on it", _ALL, 1),
    Field("out", "path", "output file; a manifest is written next to it", _ALL),
    Field("format", "str", "payload format", _ALL, "csv", ("csv", "json")),
    Field("law", "str", "radial law of the random coefficients", _LAW_USERS, "gaussian",
          ("gaussian", "radial_exponential")),
    Field("law_scale", "float", "radius scale (default: unit second moment)", _LAW_USERS),
    Field("amps_rule", "str", "amplitude rule", _AMPS_USERS, "power", ("power", "power_log", "explicit")),
    Field("amps_p", "float", "decay exponent p of the amplitudes", _AMPS_USERS, 1.0),
    Field("amps_q", "float", "log exponent q of power_log amplitudes", _AMPS_USERS, 1.0),
    Field("amps_values", "float_list", "explicit amplitudes a_1, a_2, ...", _AMPS_USERS),
    Field("alpha_p", "float", "renormalised amplitudes a_n = n^-p", ("renorm",), 0.5),
    Field("N", "int", "truncation level", ("flow", "sample", "tailmass", "invariance", "gibbs"),
          {"flow": 8, "sample": 16, "tailmass": 64, "invariance": 32, "gibbs": 16}, flags={"flow": "--n"}),
    Field("t", "float_list", "flow time(s)", ("flow", "invariance", "gibbs"), (1.0,)),
    Field("s", "float", "Sobolev index of the profile norm", ("flow",), 0.0),
    Field("state", "path", "state file (CSV n,re,im or JSON pairs); sampled when absent", ("flow",)),
    Field("profile", "int_list", "truncation levels for the convergence profile", ("flow",)),
    Field("sigma", "float", "weight exponent of the tail-mass product", ("sample", "tailmass"), 1.0),
    Field("grid", "int_list", "increasing list of truncation levels", ("tailmass", "renorm", "weakconv"),
          {"renorm": tuple(2 ** k for k in range(5, 13)), "weakconv": (1, 2, 4, 8, 16)}),
    Field("samples", "int", "Monte-Carlo sample count", STOCHASTIC,
          {"sample": 1000, "renorm": 100_000, "invariance": 100_000, "weakconv": 100_000, "gibbs": 100_000}),
    Field("mode", "int_list", "modes whose renormalised phases are tracked", ("renorm",), (1,),
          flags={"renorm": "--n"}),
    Field("dump_trajectories", "bool", "also write per-sample phase trajectories", ("renorm",), False),
    Field("flow", "str", "which flow to test", ("invariance",), "truncated", ("truncated", "renormalized")),
    Field("functionals", "str_list", "functional ids", ("invariance", "gibbs"), FUNCTIONAL_IDS),
    Field("functional", "str", "functional id", ("weakconv",), "F1", FUNCTIONAL_IDS),
    Field("N_ref", "int", "reference truncation level", ("weakconv",), 256),
    Field("negative_control", "bool", "replace the flow by a broken one that must be detected",
          ("invariance",), False),
    Field("cutoff", "str", "cutoff profile", ("gibbs",), "hat", ("hat", "plateau")),
    Field("cutoff_a", "float", "cutoff half-width", ("gibbs",), 0.5),
    Field("ramp", "float", "plateau ramp width", ("gibbs",), 1.0),
)
FIELDS = {f.name: f for f in SCHEMA}


def fields_for(sub: str) -> list[Field]:
    return [f for f in SCHEMA if sub in f.subcommands]


# --- value conversion ------------------------------------------------------------------------

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _scalar(kind: str, text: str):
    text = text.strip()
    if kind == "int":
        return int(text)
    if kind == "float":
        v = float(text)
        if not np.isfinite(v):
            raise ValueError("not finite")
        return v
    if kind == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError("not a boolean")
    if not text:
        raise ValueError("empty")
    return text


def convert(f: Field, text: str):
    """Typed value of ``text`` for field ``f``; raises ValueError on mismatch."""
    if f.kind.endswith("_list"):
        base = f.kind[:-5]
        items = [p for p in text.replace(";", ",").split(",")]
        if not text.strip() or any(not p.strip() for p in items):
            raise ValueError("empty list item")
        return tuple(_scalar(base, p) for p in items)
    v = _scalar(f.kind, text)
    if f.choices is not None and v not in f.choices:
        raise ValueError(f"not one of {', '.join(f.choices)}")
    return v


def render(f: Field, value) -> str:
    def one(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)  # shortest text that parses back to the same double
        return str(v)

    if f.kind.endswith("_list"):
        return ", ".join(one(v) for v in value)
    return one(value)


# --- the validated config ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def law(self) -> RadialLaw:
        family = self.values.get("law", "gaussian")
        scale = self.values.get("law_scale")
        return RadialLaw.unit(family) if scale is None else RadialLaw(family, scale)

    def amps(self) -> AmplitudeSequence:
        if self.subcommand == "renorm":
            return AmplitudeSequence.power(self.values["alpha_p"])
        if self.subcommand == "gibbs":
            return AmplitudeSequence.power(1.0)
        rule = self.values["amps_rule"]
        if rule == "explicit":
            return AmplitudeSequence.explicit(self.values["amps_values"])
        if rule == "power_log":
            return AmplitudeSequence.power_log(self.values["amps_p"], self.values["amps_q"])
        return AmplitudeSequence.power(self.values["amps_p"])

    def echo(self) -> dict:
        """Every setting except those that must not change results (workers, output path)."""
        out = {"subcommand": self.subcommand}
        for f in fields_for(self.subcommand):
            if f.name in ("workers", "out"):
                continue
            v = self.values.get(f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _invariant_violations(sub: str, v: dict) -> list[str]:
    out = []

    def bad(msg):
        out.append(f"invariant-violation: {msg}")

    if v.get("workers") is not None and v["workers"] < 1:
        bad("workers must be >= 1")
    if v.get("N") is not None and v["N"] < 1:
        bad("N must be >= 1")
    if v.get("law_scale") is not None and v["law_scale"] <= 0:
        bad("law_scale must be positive")
    if v.get("samples") is not None:
        floor = {"invariance": 1000, "gibbs": 10_000}.get(sub, 2)
        if v["samples"] < floor:
            bad(f"{sub} needs samples >= {floor}")
    if sub in ("flow", "gibbs") and v.get("t") is not None and len(v["t"]) != 1:
        bad(f"{sub} takes a single flow time")
    grid = v.get("grid")
    if grid is not None and (min(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:]))):
        bad("grid must be strictly increasing positive integers")
    if v.get("profile") is not None and min(v["profile"]) < 1:
        bad("profile levels must be >= 1")

    amps = None
    if sub in _AMPS_USERS:
        try:
            if v["amps_rule"] == "explicit":
                if v.get("amps_values") is None:
                    raise ValueError("amps_rule = explicit needs amps_values")
                amps = AmplitudeSequence.explicit(v["amps_values"])
                if v.get("N") is not None and len(v["amps_values"]) < v["N"]:
                    raise ValueError(f"{len(v['amps_values'])} explicit amplitudes for N = {v['N']}")
            elif v["amps_rule"] == "power_log":
                amps = AmplitudeSequence.power_log(v["amps_p"], v["amps_q"])
            else:
                amps = AmplitudeSequence.power(v["amps_p"])
        except ValueError as exc:
            bad(str(exc))
    law = None
    if sub in _LAW_USERS:
        try:
            law = RadialLaw.unit(v["law"]) if v.get("law_scale") is None else RadialLaw(v["law"], v["law_scale"])
        except ValueError as exc:
            bad(str(exc))

    if sub == "renorm" and law is not None:
        try:
            for msg in renorm_violations(AmplitudeSequence.power(v["alpha_p"]), law):
                bad(msg)
        except ValueError as exc:
            bad(str(exc))
        if grid is not None and v.get("mode") is not None:
            if min(v["mode"]) < 1 or max(v["mode"]) > grid[0]:
                bad("tracked modes must lie in 1..min(grid)")
        if grid is not None and len(grid) < 2:
            bad("renorm grid needs at least two levels")
    if sub == "invariance" and v.get("flow") == "renormalized" and amps is not None and law is not None:
        for msg in renorm_violations(amps, law):
            bad(msg)
    if sub == "weakconv" and grid is not None and v["N_ref"] <= max(grid):
        bad("N_ref must exceed every grid level")
    if sub == "weakconv" and amps is not None and v["amps_rule"] == "explicit":
        if len(v["amps_values"]) < v["N_ref"]:
            bad(f"{len(v['amps_values'])} explicit amplitudes for N_ref = {v['N_ref']}")
    for name in v.get("functionals") or ():
        if name not in FUNCTIONAL_IDS:
            bad(f"unknown functional {name!r}")
    if sub == "gibbs":
        if v["cutoff_a"] <= 0 or v["ramp"] <= 0:
            bad("cutoff_a and ramp must be positive")
    return out


def build_config(entries: list[tuple[str, str, str]], subcommand: str | None = None) -> ExperimentConfig:
    """Validate ``(key, text, location)`` entries; later entries override earlier ones
    only when their location says ``override``.  Raises ConfigError with every violation.
    """
    violations = []
    seen: dict[str, str] = {}
    raw: dict[str, tuple[str, str]] = {}
    for key, text, where in entries:
        if key == "subcommand":
            if subcommand is not None and text.strip() != subcommand and not where.startswith("override"):
                violations.append(f"invariant-violation: {where}: config is for {text.strip()!r}, "
                                  f"not {subcommand!r}")
            subcommand = subcommand or text.strip()
            continue
        if key in seen and not where.startswith("override"):
            violations.append(f"duplicate-key: {key!r} at {seen[key]} and {where}")
            continue
        seen.setdefault(key, where)
        raw[key] = (text, where)

    if subcommand is None:
        raise ConfigError(violations + ["missing-subcommand: no subcommand given"])
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(violations + [f"unknown-subcommand: {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}"])

    values = {}
    for key, (text, where) in raw.items():
        f = FIELDS.get(key)
        if f is None:
            violations.append(f"unknown-key: {where}: {key!r}")
            continue
        if subcommand not in f.subcommands:
            violations.append(f"unknown-key: {where}: {key!r} does not apply to {subcommand}")
            continue
        try:
            values[key] = convert(f, text)
        except ValueError as exc:
            violations.append(f"type-mismatch: {where}: {key} expects {f.kind}, got {text.strip()!r} ({exc})")
    for f in fields_for(subcommand):
        if f.name not in values and f.name not in raw:
            values[f.name] = f.default_for(subcommand)
    if values.get("seed") is None:
        needs = subcommand in STOCHASTIC or (subcommand == "flow" and values.get("state") is None)
        if needs and "seed" not in raw:
            violations.append(f"missing-seed: {subcommand} draws random numbers and needs a seed")
    if not violations:
        violations.extend(_invariant_violations(subcommand, values))
    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(subcommand, values)


def config_entries(text: str, source: str = "line") -> list[tuple[str, str, str]]:
    """Split config text into ``(key, value, location)``; syntax errors raise ConfigError."""
    entries, errors = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"syntax: {source} {lineno}: expected 'key = value', got {body!r}")
            continue
        key, value = body.split("=", 1)
        entries.append((key.strip(), value.strip(), f"{source} {lineno}"))
    if errors:
        raise ConfigError(errors)
    return entries


def parse_config(text: str, subcommand: str | None = None) -> ExperimentConfig:
    return build_config(config_entries(text), subcommand)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parsing it returns an equal config."""
    lines = [f"subcommand = {cfg.subcommand}"]
    for f in fields_for(cfg.subcommand):
        v = cfg.values.get(f.name)
        if v is not None:
            lines.append(f"{f.name} = {render(f, v)}")
    return "\n".join(lines) + "\n"
