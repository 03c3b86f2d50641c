#!/usr/bin/env python3
"""
Run Configuration
Resolved settings for every computation: defaults < JSON file < environment < flags
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from sympy import isprime

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "henon_config.json"

# Only these two settings may come from the environment
ENV_OVERRIDES = {
    "HENON_CACHE_PATH": ("cache_path", str),
    "HENON_WORKERS": ("workers", int),
}


class ConfigError(ValueError):
    """Invalid configuration value"""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class RunConfig:
    tol: float = 1e-8
    eps: float = 1e-6
    n_max: int = 2048
    padic_max_iterates: int = 2048
    padic_max_bits: int = 200000
    primes: List[int] = field(default_factory=lambda: [101, 103])
    height_bound: int = 10000
    iterate_search_bound: int = 4
    expansion_degree_cap: int = 4096
    resultant_degree_cap: int = 8
    quad_points: int = 512
    newton_starts: int = 0          # 0 = automatic (64 * lambda^n, capped)
    seed: int = 0
    cache_path: Optional[str] = None
    output_format: str = "json"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("tol", "eps"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(name, f"must be a positive number, got {value!r}")
        for name in ("n_max", "padic_max_iterates", "padic_max_bits", "height_bound",
                     "iterate_search_bound", "expansion_degree_cap", "resultant_degree_cap",
                     "quad_points", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(name, f"must be a positive integer, got {value!r}")
        if not isinstance(self.newton_starts, int) or self.newton_starts < 0:
            raise ConfigError("newton_starts", f"must be >= 0, got {self.newton_starts!r}")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.primes:
            raise ConfigError("primes", "at least one prime is required")
        for p in self.primes:
            if not isinstance(p, int) or not isprime(p):
                raise ConfigError("primes", f"{p!r} is not prime")
        if self.output_format not in ("json", "csv"):
            raise ConfigError("output_format", f"must be 'json' or 'csv', got {self.output_format!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def replace(self, **overrides) -> "RunConfig":
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**data)


def load_config_file(path: str) -> Dict[str, Any]:
    """Load a JSON config file; a missing or unreadable file yields no overrides"""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        logger.info("config file %s not found, using defaults", path)
        return {}
    except json.JSONDecodeError as e:
        logger.error("config file %s is not valid JSON (line %d): %s", path, e.lineno, e.msg)
        return {}

    if not isinstance(data, dict):
        logger.error("config file %s is not a JSON object, ignoring it", path)
        return {}

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        logger.warning("ignoring unknown config keys in %s: %s", path, ", ".join(unknown))
    return {k: v for k, v in data.items() if k in known}


def env_overrides(environ: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for var, (name, kind) in ENV_OVERRIDES.items():
        raw = environ.get(var)
        if raw is None or raw == "":
            continue
        try:
            out[name] = kind(raw)
        except ValueError:
            raise ConfigError(name, f"environment variable {var}={raw!r} is not a valid {kind.__name__}")
    return out


def resolve_config(path: Optional[str] = None, flags: Optional[Dict[str, Any]] = None,
                   environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Build the effective RunConfig.

    Args:
        path: JSON config file (defaults to henon_config.json in the working directory)
        flags: explicit command-line values; None entries mean "not given"
        environ: environment mapping (defaults to os.environ)
    """
    data: Dict[str, Any] = {}
    data.update(load_config_file(path or DEFAULT_CONFIG_PATH))
    data.update(env_overrides(environ))
    data.update({k: v for k, v in (flags or {}).items() if v is not None})
    try:
        return RunConfig(**data)
    except TypeError as e:
        raise ConfigError("config", str(e))
