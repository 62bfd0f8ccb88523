"""Flat ``key = value`` run configuration.

Lines starting with ``#`` or ``;`` are comments. Model parameters use the
``param.<name>`` prefix, e.g. ``param.k = 1.2``. Vectors are comma separated.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .maps import CATALOGUE, DEFAULT_BBOX

_SECTION = "run"


@dataclass(frozen=True)
class RunConfig:
    model: str
    params: dict[str, float] = field(default_factory=dict)
    fixed_point_guess: tuple[float, float] = (0.0, 0.0)
    delta: float = 1e-4
    depth: int = 4
    search_depth: int = 24
    h_max: float = 1e-2
    theta_max: float = 0.1
    alpha_min: float = 1e-3
    proj_tol: float = 1e-6
    n_scan: int = 5
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX
    out_dir: str = "out"
    wide_scan: bool = False
    dump_curves: bool = False
    stability_check: bool = False

    def __post_init__(self):
        if self.model not in CATALOGUE:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(CATALOGUE)}")
        for name in ("delta", "h_max", "theta_max", "alpha_min", "proj_tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive finite number, got {v}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.search_depth < 1:
            raise ConfigError(f"search_depth must be >= 1, got {self.search_depth}")
        if self.n_scan < 1:
            raise ConfigError(f"n_scan must be >= 1, got {self.n_scan}")
        xmin, xmax, ymin, ymax = self.bbox
        if not (xmin < xmax and ymin < ymax):
            raise ConfigError(f"bbox must be xmin < xmax, ymin < ymax, got {self.bbox}")

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        """Serialize back to the flat file format (round-trips through ``parse_config``)."""
        lines = [f"model = {self.model}"]
        lines += [f"param.{k} = {v!r}" for k, v in sorted(self.params.items())]
        for f in fields(self):
            if f.name in ("model", "params"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_ALIASES = {"out": "out_dir", "fixed_point": "fixed_point_guess", "guess": "fixed_point_guess", "N_scan": "n_scan"}
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _vector(key: str, raw: str, n: int) -> tuple[float, ...]:
    parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
    if len(parts) != n:
        raise ConfigError(f"{key} needs {n} comma-separated numbers, got {raw!r}")
    return tuple(_number(key, p) for p in parts)


def _number(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: {raw!r} is not a number") from None


def _integer(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: {raw!r} is not an integer") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    raw = dict(cp[_SECTION])
    kw: dict = {}
    params: dict[str, float] = {}
    types = {f.name: f.type for f in fields(RunConfig)}
    for key, val in raw.items():
        val = val.strip()
        if key.startswith("param."):
            params[key[6:]] = _number(key, val)
            continue
        name = _ALIASES.get(key, key)
        if name not in types or name == "params":
            raise ConfigError(f"unknown config key {key!r}")
        if name == "model":
            kw[name] = val
        elif name == "fixed_point_guess":
            kw[name] = _vector(key, val, 2)
        elif name == "bbox":
            kw[name] = _vector(key, val, 4)
        elif name in ("wide_scan", "dump_curves", "stability_check"):
            if val.lower() not in _BOOL:
                raise ConfigError(f"{key}: {val!r} is not a boolean")
            kw[name] = _BOOL[val.lower()]
        elif name in ("depth", "search_depth", "n_scan"):
            kw[name] = _integer(key, val)
        elif name == "out_dir":
            kw[name] = val
        else:
            kw[name] = _number(key, val)
    if "model" not in kw:
        raise ConfigError("config must set 'model'")
    return RunConfig(params=params, **kw)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)
