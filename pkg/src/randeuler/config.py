"""Experiment configuration files.

A config file is INI-style: one ``[command]`` section per subcommand with
``key = value`` lines.  Every key has a declared type and range and unknown
keys are rejected.  ``ExperimentConfig.to_text`` writes the fully resolved
config back in a form that parses to an equal config.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ConfigError
from .noise import NoiseKind
from .problems import fixture_from_name


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _parse_float(s) -> float:
    try:
        x = float(s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a number: {s!r}") from exc
    if math.isnan(x):
        raise ConfigError("NaN is not allowed")
    return x


def _parse_int(s) -> int:
    try:
        return int(str(s).strip())
    except ValueError as exc:
        raise ConfigError(f"not an integer: {s!r}") from exc


def _split(s) -> list[str]:
    # commas inside parentheses belong to fixture arguments
    out, depth, cur = [], 0, ""
    for ch in str(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


@dataclass(frozen=True)
class Key:
    parse: Callable[[Any], Any]
    fmt: Callable[[Any], str]
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    hint: str = ""

    def coerce(self, name, raw):
        value = self.parse(raw)
        if not self.check(value):
            raise ConfigError(f"{name} = {raw!r} is out of range ({self.hint})")
        return value


def _int(default, lo=None, hi=None):
    ok = lambda v: (lo is None or v >= lo) and (hi is None or v <= hi)  # noqa: E731
    return Key(_parse_int, str, default, ok, f"integer in [{lo}, {hi}]")


def _float(default, lo=-math.inf, hi=math.inf, lo_open=False):
    def ok(v):
        above = v > lo if lo_open else v >= lo
        return above and v <= hi and math.isfinite(v)

    return Key(_parse_float, _fmt_float, default, ok, f"real in {'(' if lo_open else '['}{lo}, {hi}]")


def _choice(default, options):
    return Key(lambda s: str(s).strip(), str, default, lambda v: v in options, f"one of {options}")


def _int_list(default, lo=1):
    return Key(
        lambda s: [_parse_int(x) for x in _split(s)],
        lambda v: ",".join(str(x) for x in v),
        default,
        lambda v: len(v) > 0 and all(x >= lo for x in v),
        f"non-empty list of integers >= {lo}",
    )


def _float_list(default, lo=0.0, hi=1.0):
    return Key(
        lambda s: [_parse_float(x) for x in _split(s)],
        lambda v: ",".join(_fmt_float(x) for x in v),
        default,
        lambda v: len(v) > 0 and all(lo <= x <= hi for x in v),
        f"non-empty list of reals in [{lo}, {hi}]",
    )


def _valid_fixture(name):
    fixture_from_name(name)
    return True


def _fixture(default):
    return Key(lambda s: str(s).strip(), str, default, _valid_fixture, "fixture name")


def _fixture_list(default):
    return Key(
        _split,
        lambda v: ",".join(v),
        default,
        lambda v: len(v) > 0 and all(_valid_fixture(x) for x in v),
        "list of fixture names",
    )


SCHEME_CHOICES = ("explicit", "implicit")
NOISE_CHOICES = tuple(k.value for k in NoiseKind)


def _sign(default):
    return Key(_parse_float, _fmt_float, default, lambda v: v in (-1.0, 1.0), "-1 or 1")


def _seed():
    return _int(42, 0, 2**64 - 1)


_NOISE_KEYS = {
    "noise": _choice("Zero", NOISE_CHOICES),
    "eta_shift": _float(0.0, -1.0, 1.0),
    "noise_sign": _sign(1.0),
    "noise_scale": _float(1.0, -1.0, 1.0),
    "noise_omega": _float(6 * math.pi),
    "noise_kappa": _float(1.0),
}

_SOLVER_KEYS = {
    "fp_tolerance": _float(1e-12, 0.0, 1.0, lo_open=True),
    "max_iterations": _int(200, 1),
    "predictor": _choice("ExplicitEulerPredictor", ("ExplicitEulerPredictor", "PreviousNode")),
}

SCHEMA: dict[str, dict[str, Key]] = {
    "convergence": {
        "fixture": _fixture("holder(0.25)"),
        "scheme": _choice("explicit", SCHEME_CHOICES),
        **_NOISE_KEYS,
        "delta": _float(0.0, 0.0, 1.0),
        "n_list": _int_list([2**k for k in range(6, 14)]),
        "paths": _int(200, 2),
        "p": _float(2.0, 2.0),
        "sup_refinement": _int(8, 1),
        **_SOLVER_KEYS,
        "seed": _seed(),
    },
    "noise-sweep": {
        "fixture": _fixture("adversarial(0.1)"),
        "scheme": _choice("explicit", SCHEME_CHOICES),
        **_NOISE_KEYS,
        "noise": _choice("ConstantDirection", NOISE_CHOICES),
        "noise_sign": _sign(-1.0),
        "deltas": _float_list([0.0, 0.0125, 0.025, 0.05, 0.1]),
        "n": _int(8192, 1),
        "paths": _int(50, 2),
        "p": _float(2.0, 2.0),
        "sup_refinement": _int(8, 1),
        **_SOLVER_KEYS,
        "seed": _seed(),
    },
    "stability": {
        "mode": _choice("explicit", SCHEME_CHOICES),
        "plane": _choice("lambda", ("lambda", "h2lambda")),
        "re_min": _float(-4.0),
        "re_max": _float(1.0),
        "im_min": _float(-2.0),
        "im_max": _float(2.0),
        "nx": _int(50, 2),
        "ny": _int(50, 2),
        "h": _float(0.1, 0.0, lo_open=True),
        "steps": _int(5000, 1, 10**6),
        "paths": _int(100, 1),
        "blowup": _float(1e6, 1.0, lo_open=True),
        "decay": _float(1e-6, 0.0, 1.0, lo_open=True),
        "seed": _seed(),
    },
    "validate": {
        "fixtures": _fixture_list(
            ["linear", "holder(0.25)", "holder(1)", "kink(0.5)", "state(2)", "adversarial(0.1)", "stability(-1,0)"]
        ),
        "schemes": Key(
            _split, ",".join, list(SCHEME_CHOICES), lambda v: len(v) > 0 and set(v) <= set(SCHEME_CHOICES), "schemes"
        ),
        "deltas": _float_list([0.0, 0.01, 0.1]),
        "n": _int(64, 1),
        "paths": _int(100, 1),
        **_SOLVER_KEYS,
        "seed": _seed(),
    },
    "demo-lower-bound": {
        "deltas": _float_list([0.01, 0.05, 0.1]),
        "a": _float(0.0),
        "b": _float(1.0),
        "n": _int(64, 4),
        "paths": _int(10, 2),
        "sup_refinement": _int(8, 1),
        "seed": _seed(),
    },
    "plot": {},
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.command == other.command and self.values == other.values

    @classmethod
    def build(cls, command: str, overrides: dict | None = None) -> "ExperimentConfig":
        if command not in SCHEMA:
            raise ConfigError(f"unknown command {command!r}")
        schema = SCHEMA[command]
        values = {}
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(schema)
        if unknown:
            raise ConfigError(f"unknown key(s) for {command}: {', '.join(sorted(unknown))}")
        for name, key in schema.items():
            if name in overrides:
                values[name] = key.coerce(name, overrides[name])
            else:
                values[name] = key.default
        if command == "demo-lower-bound" and not values["a"] < values["b"]:
            raise ConfigError("need a < b")
        if command == "stability":
            if not values["re_min"] < values["re_max"] or not values["im_min"] < values["im_max"]:
                raise ConfigError("empty stability grid")
            if not values["blowup"] > 1 > values["decay"]:
                raise ConfigError("need blowup > 1 > decay")
        return cls(command, values)

    @classmethod
    def from_text(cls, command: str, text: str, overrides: dict | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        raw = dict(parser[command]) if parser.has_section(command) else {}
        raw.update(overrides or {})
        return cls.build(command, raw)

    @classmethod
    def from_file(cls, command: str, path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(command, text, overrides)

    def as_strings(self) -> dict:
        schema = SCHEMA[self.command]
        return {name: schema[name].fmt(self.values[name]) for name in schema}

    def to_text(self) -> str:
        lines = [f"[{self.command}]"]
        lines += [f"{k} = {v}" for k, v in self.as_strings().items()]
        return "\n".join(lines) + "\n"
