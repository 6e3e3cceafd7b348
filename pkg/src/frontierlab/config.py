"""Run configuration: defaults, INI file, environment, then CLI flags.

Precedence is defaults < config file < FRONTIERLAB_* environment variables <
explicit flags.  The resolved configuration hashes to a stable hex digest that
output files and service responses embed, so any artifact can be traced back
to the exact settings that produced it.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, fields, replace
from datetime import date

from . import __version__
from .errors import DataError
from .fixtures import DEFAULT_BOUNDARY, fixture_path

_MODULE = "app-interface"

ENV_PREFIX = "FRONTIERLAB_"


@dataclass(frozen=True)
class RunConfig:
    prices: str = ""
    factors: str = ""
    market_caps: str = ""
    residual_prices: str = ""
    boundary: date = DEFAULT_BOUNDARY
    min_weight: float = 0.0
    max_weight: float = 1.0
    trading_days: int = 252
    risk_free: float = 0.0
    tau: float = 0.0          # 0 means "default to 1/T"
    omega_scale: float = 1.0
    views: tuple[str, ...] = ()
    seed: int = 0
    samples: int = 100_000
    sampler: str = "dirichlet"
    objective: str = "min_variance"
    points: int = 50
    outdir: str = "frontierlab_out"
    host: str = "127.0.0.1"
    port: int = 8642
    simulation_workers: int = 1
    ui_dir: str = "frontend/dist"

    def with_fixture_defaults(self) -> "RunConfig":
        """Fill any unset data sources with the bundled fixtures."""
        updates = {}
        if not self.prices:
            updates["prices"] = fixture_path("prices.csv")
        if not self.factors:
            updates["factors"] = fixture_path("factors.csv")
        if not self.market_caps:
            updates["market_caps"] = fixture_path("market_caps.csv")
        if not self.residual_prices:
            updates["residual_prices"] = fixture_path("prices_rest.csv")
        return replace(self, **updates) if updates else self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES.get(name)
    if kind is None:
        raise DataError(_MODULE, "config", f"unknown configuration key {name!r}")
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "date":
            return date.fromisoformat(raw)
        if kind == "tuple[str, ...]":
            return tuple(part.strip() for part in raw.split(";") if part.strip())
        return raw
    except ValueError:
        raise DataError(_MODULE, "config", f"bad value {raw!r} for configuration key {name!r}") from None


def load_config(path: str | None = None, env: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve a RunConfig from an optional INI file, the environment, and overrides."""
    values: dict = {}
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise DataError(_MODULE, "config", f"unreadable config file {path!r}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                values[key] = _coerce(key, raw)

    environ = os.environ if env is None else env
    for key, raw in environ.items():
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):].lower()
            if name in _FIELD_TYPES:
                values[name] = _coerce(name, raw)

    if overrides:
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
    return RunConfig(**values)


# Fields that steer where results go or how the service is hosted, not what
# gets computed.  Left out of the hash so the digest identifies the numbers.
_PLUMBING_FIELDS = frozenset({"outdir", "host", "port", "ui_dir", "simulation_workers"})


def config_hash(config: RunConfig) -> str:
    """Stable digest of the computation-relevant configuration."""
    lines = [f"version={__version__}"]
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        if f.name in _PLUMBING_FIELDS:
            continue
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ";".join(value)
        lines.append(f"{f.name}={value}")
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExperimentRecipe:
    """Reproducible pipeline description: ordered stages plus provenance."""

    name: str
    stages: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    config_digest: str
    seed: int
    artifact_version: str = __version__

    def serialize(self) -> str:
        lines = [
            f"recipe={self.name}",
            f"config_hash={self.config_digest}",
            f"seed={self.seed}",
            f"artifact_version={self.artifact_version}",
        ]
        for i, (stage, params) in enumerate(self.stages):
            lines.append(f"stage.{i}={stage}")
            for key, value in params:
                lines.append(f"stage.{i}.{key}={value}")
        return "\n".join(lines) + "\n"
