"""Experiment configuration: TOML files checked against a small schema.

Every experiment file has a top-level ``kind`` and ``master_seed``; the other
keys depend on the kind and are listed in :data:`SCHEMAS`. Unknown keys,
missing required keys and wrongly typed values raise
:class:`~poisson_concentration.errors.ConfigurationError` naming the key and,
when it can be located, its line in the file.
"""

from __future__ import annotations

import copy
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError

KINDS = ("constants", "inequality-suite", "tail-verify", "polytope", "cylinder")
TAILS = ("upper_tail", "lower_tail", "two_sided")


@dataclass(frozen=True)
class Key:
    type: str                       # int, float, str, bool, floats, strs, table
    required: bool = False
    default: Any = None
    choices: Optional[tuple] = None
    check: Optional[Callable[[Any], bool]] = None
    check_msg: str = ""
    schema: Optional[dict] = None   # for tables


def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


COMMON = {
    "kind": Key("str", True, choices=KINDS),
    "master_seed": Key("int", True, check=lambda s: 0 <= s < 2 ** 64, check_msg="must be an unsigned 64-bit integer"),
    "output_dir": Key("str", False, "results"),
    "plot": Key("bool", False, False),
    "description": Key("str", False, ""),
}

BODY = {
    "kind": Key("str", True, choices=("ball", "cube", "ellipsoid", "polytope")),
    "dim": Key("int", False, None, check=lambda d: 2 <= d <= 6, check_msg="must lie in [2, 6]"),
    "radius": Key("float", False, 1.0, check=_positive, check_msg="must be positive"),
    "side": Key("float", False, 1.0, check=_positive, check_msg="must be positive"),
    "semi_axes": Key("floats", False, None),
    "vertices": Key("matrix", False, None),
}

BASE = {
    "kind": Key("str", True, choices=("ball", "square", "mixture")),
    "size": Key("float", False, None, check=_positive, check_msg="must be positive"),
    "kinds": Key("strs", False, None),
    "sizes": Key("floats", False, None),
    "weights": Key("floats", False, None),
}

WINDOW = {
    "kind": Key("str", True, choices=("ball", "box")),
    "radius": Key("float", False, 1.0, check=_positive, check_msg="must be positive"),
    "sides": Key("floats", False, None),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "constants": {
        "p_grid": Key("floats", False, [1.000001, 1.5, 2.0, 3.0, 4.0, 10.0, 100.0, 1e6]),
        "monotone_grid_size": Key("int", False, 10_000, check=lambda n: n >= 2, check_msg="must be >= 2"),
    },
    "inequality-suite": {
        "lam_grid": Key("floats", False, [0.5, 1.0, 2.0, 5.0]),
        "r_grid": Key("floats", False, [1.1, 1.3, 1.5, 1.7, 1.9]),
        "p_grid": Key("floats", False, [2.0, 3.0, 4.0]),
        "functions": Key("strs", False, ["k", "min(k,10)", "harmonic", "sqrt(k+1)", "exp(-k)+1"]),
        "checks": Key("strs", False, ["phi_r", "log", "beckner", "recursive_lp", "moments"]),
    },
    "tail-verify": {
        "function": Key("str", True),
        "lam": Key("float", True, check=_positive, check_msg="must be positive"),
        "n_reps": Key("int", True, check=_positive, check_msg="must be positive"),
        "t_grid": Key("floats", True),
        "tail": Key("str", False, "upper_tail", choices=TAILS),
        "L": Key("float", False, None, check=_positive, check_msg="must be positive"),
    },
    "polytope": {
        "body": Key("table", True, schema=BODY),
        "model": Key("str", False, "In", choices=("In", "Bd")),
        "gamma": Key("float", True, check=_non_negative, check_msg="must be non-negative"),
        "functionals": Key("strs", False, ["zeta"]),
        "n_reps": Key("int", True, check=_positive, check_msg="must be positive"),
        "n_cert": Key("int", False, 100, check=_non_negative, check_msg="must be non-negative"),
        "n_insert": Key("int", False, 16, check=_non_negative, check_msg="must be non-negative"),
        "t_grid": Key("floats", False, []),
        "tail": Key("str", False, "upper_tail", choices=("upper_tail", "lower_tail")),
    },
    "cylinder": {
        "d": Key("int", True, check=_positive, check_msg="must be positive"),
        "k": Key("int", True, check=_non_negative, check_msg="must be non-negative"),
        "gamma": Key("float", True, check=_non_negative, check_msg="must be non-negative"),
        "base": Key("table", True, schema=BASE),
        "window": Key("table", True, schema=WINDOW),
        "direction": Key("str", False, "uniform", choices=("uniform", "fixed")),
        "n_reps": Key("int", True, check=_positive, check_msg="must be positive"),
        "n_points": Key("int", False, 10_000, check=_positive, check_msg="must be positive"),
        "n_cert": Key("int", False, 20, check=_non_negative, check_msg="must be non-negative"),
        "n_mu_samples": Key("int", False, 100, check=_positive, check_msg="must be positive"),
        "t_grid": Key("floats", False, []),
        "tail": Key("str", False, "upper_tail", choices=("upper_tail", "lower_tail")),
        "compare": Key("bool", False, False),
    },
}


def _line_of(text: Optional[str], key: str, section: Optional[str] = None) -> Optional[int]:
    """1-based line of ``key = ...`` (inside ``[section]`` if given), else of the section header."""
    if not text:
        return None
    lines = text.splitlines()
    current = None
    header_line = None
    pattern = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for n, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("[") and not stripped.startswith("[["):
            current = stripped.strip("[]").strip()
            if section is not None and current == section:
                header_line = n
            continue
        if pattern.match(line) and current == section:
            return n
    return header_line


def _type_ok(kind: str, value: Any) -> bool:
    number = (int, float)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, number) and not isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "floats":
        return isinstance(value, list) and all(isinstance(v, number) and not isinstance(v, bool) for v in value)
    if kind == "strs":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if kind == "matrix":
        return isinstance(value, list) and all(_type_ok("floats", row) for row in value)
    if kind == "table":
        return isinstance(value, dict)
    raise ValueError(kind)


def _validate_table(data: dict, schema: dict[str, Key], text: Optional[str],
                    section: Optional[str]) -> dict:
    where = f" in [{section}]" if section else ""
    for key in data:
        if key not in schema:
            raise ConfigurationError(f"unknown key: {key}{where}", field=key,
                                     line=_line_of(text, key, section))
    out = {}
    for key, spec in schema.items():
        if key not in data:
            if spec.required:
                raise ConfigurationError(f"missing required key: {key}{where}", field=key,
                                         line=_line_of(text, key, section))
            out[key] = copy.deepcopy(spec.default)
            continue
        value = data[key]
        line = _line_of(text, key, section)
        if not _type_ok(spec.type, value):
            raise ConfigurationError(f"key {key}{where} must be of type {spec.type}, got {value!r}",
                                     field=key, line=line)
        if spec.type == "float":
            value = float(value)
        if spec.type == "floats":
            value = [float(v) for v in value]
        if spec.choices is not None and value not in spec.choices:
            raise ConfigurationError(f"key {key}{where} must be one of {list(spec.choices)}, got {value!r}",
                                     field=key, line=line)
        if spec.check is not None and not spec.check(value):
            raise ConfigurationError(f"key {key}{where} {spec.check_msg}, got {value!r}", field=key, line=line)
        if spec.type == "table":
            value = _validate_table(value, spec.schema, text, key)
        out[key] = value
    return out


def validate(data: dict, text: Optional[str] = None) -> dict:
    """Resolved configuration: defaults filled in, every key checked."""
    if "kind" not in data:
        raise ConfigurationError("missing required key: kind", field="kind", line=None)
    kind = data["kind"]
    if kind not in KINDS:
        raise ConfigurationError(f"key kind must be one of {list(KINDS)}, got {kind!r}", field="kind",
                                 line=_line_of(text, "kind"))
    resolved = _validate_table(data, {**COMMON, **SCHEMAS[kind]}, text, None)
    _cross_checks(resolved, text)
    return resolved


def _cross_checks(cfg: dict, text: Optional[str]):
    kind = cfg["kind"]
    if kind == "cylinder" and cfg["k"] > cfg["d"] - 1:
        raise ConfigurationError(f"key k must lie in [0, d - 1], got {cfg['k']}", field="k",
                                 line=_line_of(text, "k"))
    if kind == "cylinder":
        base = cfg["base"]
        if base["kind"] == "mixture":
            kinds, sizes, weights = base["kinds"], base["sizes"], base["weights"]
            if not kinds or sizes is None or weights is None or not len(kinds) == len(sizes) == len(weights):
                raise ConfigurationError("mixture base needs kinds, sizes and weights of equal length",
                                         field="base", line=_line_of(text, "kind", "base"))
        elif base["size"] is None:
            raise ConfigurationError("missing required key: size in [base]", field="size",
                                     line=_line_of(text, "kind", "base"))
    if kind == "polytope":
        body = cfg["body"]
        if body["kind"] in ("ball", "cube") and body["dim"] is None:
            raise ConfigurationError("missing required key: dim in [body]", field="dim",
                                     line=_line_of(text, "kind", "body"))
        if body["kind"] == "ellipsoid" and not body["semi_axes"]:
            raise ConfigurationError("missing required key: semi_axes in [body]", field="semi_axes",
                                     line=_line_of(text, "kind", "body"))
        if body["kind"] == "polytope" and not body["vertices"]:
            raise ConfigurationError("missing required key: vertices in [body]", field="vertices",
                                     line=_line_of(text, "kind", "body"))


def parse_text(text: str) -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}", line=getattr(exc, "lineno", None)) from exc
    return validate(data, text)


def load_config(path) -> dict:
    """Read and validate a TOML experiment file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_text(text)
