"""Declarative config handling and artifact serialization for the runner.

Configs are single nested JSON documents.  Unknown keys are rejected, every
referenced built-in must exist, and tolerance overrides must be nonnegative.
Every CSV artifact carries a header row and a trailing manifest comment with
the hash of the canonical config; reports are JSON objects carrying the same
hash, so identical (config, seed) pairs give byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .drawdown import FloorFunction, builtin_floor
from .functions import C12Function, builtin_c12
from .paths import (
    AffineCombinationGenerator,
    CompoundJumpGenerator,
    DyadicBrownianGenerator,
    FormulaGenerator,
    GeometricGenerator,
    PathGenerator,
    StepGenerator,
)

__all__ = [
    "ConfigError",
    "load_config",
    "config_hash",
    "check_keys",
    "make_generator",
    "make_function",
    "make_floor",
    "write_csv",
    "write_report",
]


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def load_config(path: str | Path) -> dict:
    try:
        with open(path) as fp:
            cfg = json.load(fp)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in {where}")
    return section[key]


def tolerance(section: dict, key: str, default: float) -> float:
    v = section.get(key, default)
    if not isinstance(v, (int, float)) or v < 0:
        raise ConfigError(f"tolerance {key!r} must be a nonnegative number")
    return float(v)


_FORMULAS = {
    "linear": lambda slope=1.0, intercept=0.0: (lambda t: intercept + slope * t),
    "constant": lambda c=0.0: (lambda t: np.full_like(np.asarray(t, dtype=float), c)),
    "zigzag": lambda base=0.0, amplitude=1.0, period=0.5: (
        lambda t: base
        + amplitude
        * (2.0 / period)
        * np.minimum(np.mod(t, period), period - np.mod(t, period))
    ),
}


def make_generator(ref: dict, where: str = "generator") -> PathGenerator:
    if not isinstance(ref, dict) or "kind" not in ref:
        raise ConfigError(f"{where} must be an object with a 'kind'")
    kind = ref["kind"]
    params = {k: v for k, v in ref.items() if k != "kind"}
    try:
        if kind == "formula":
            name = params.pop("name")
            fn = _FORMULAS[name](**params)
            return FormulaGenerator(fn)
        if kind == "step":
            return StepGenerator(**params)
        if kind == "dyadic-brownian":
            return DyadicBrownianGenerator(**params)
        if kind == "compound-jump":
            return CompoundJumpGenerator(**params)
        if kind == "geometric":
            return GeometricGenerator(**params)
        if kind == "affine-combination":
            gx = make_generator(params.pop("x"), where + ".x")
            gy = make_generator(params.pop("y"), where + ".y")
            return AffineCombinationGenerator(gx, gy, **params)
    except KeyError as exc:
        raise ConfigError(f"{where}: unknown name {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: bad parameters for kind {kind!r}: {exc}") from exc
    raise ConfigError(f"{where}: unknown generator kind {kind!r}")


def make_function(ref: dict, where: str = "f") -> C12Function:
    if not isinstance(ref, dict) or "name" not in ref:
        raise ConfigError(f"{where} must be an object with a 'name'")
    params = {k: v for k, v in ref.items() if k != "name"}
    try:
        return builtin_c12(ref["name"], **params)
    except KeyError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: bad parameters: {exc}") from exc


def make_floor(ref: dict, where: str = "floor") -> FloorFunction:
    if not isinstance(ref, dict) or "name" not in ref:
        raise ConfigError(f"{where} must be an object with a 'name'")
    params = {k: v for k, v in ref.items() if k not in ("name", "a_star")}
    try:
        return builtin_floor(ref["name"], float(require(ref, "a_star", where)), **params)
    except KeyError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{where}: bad parameters: {exc}") from exc


def write_csv(path: Path, header: list, rows, cfg_hash: str) -> None:
    with open(path, "w") as fp:
        fp.write(",".join(header) + "\n")
        for row in rows:
            fp.write(",".join(_fmt(v) for v in row) + "\n")
        fp.write(f"# config_hash={cfg_hash}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(path: Path, report: dict, cfg_hash: str) -> None:
    doc = dict(report)
    doc["config_hash"] = cfg_hash
    with open(path, "w") as fp:
        json.dump(doc, fp, sort_keys=True, indent=2, default=_json_default)
        fp.write("\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"not JSON-serializable: {type(v)}")
