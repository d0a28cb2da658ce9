"""Experiment configuration: strict YAML/JSON schema with documented caps.

Schema (every key optional unless noted; unknown keys are rejected)::

    channel_file: path          # required by capacity, converse, inspect-channel
    seed: int                   # required (here or via --seed)
    output_dir: path            # default "results"
    threads: int                # default 1
    capacity:  {n_max, restarts, max_iters, tol, ensemble_size, max_output_dim}
    lemmas:    {trace_instances, trace_blocks, trace_delta, weak_law_instances,
                weak_law_deltas, samples, fannes_instances, gentle_instances, max_dim,
                entropy_instances, entropy_blocks, entropy_delta, sandwich_instances,
                shadow_instances}
    converse:  {rates, rate_factors, ref_n, n_values, trials, ensemble_n,
                restarts, max_entries}

``converse.rates`` are absolute bits per letter; ``rate_factors`` multiply
the reference rate chi^(ref_n)/ref_n.  Exactly one of them must be given.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

# (type, min, max); tuples of ("list", item type, min, max, max_len)
_CAPACITY_SCHEMA = {
    "n_max": (int, 1, 10),
    "restarts": (int, 1, 1000),
    "max_iters": (int, 1, 100_000),
    "tol": (float, 0.0, 1.0),
    "ensemble_size": ("optional", int, 1, 4096),
    "max_output_dim": (int, 2, 4096),
}
_LEMMA_SCHEMA = {
    "trace_instances": (int, 0, 100_000),
    "trace_blocks": ("list", int, 1, 1000, 64),
    "trace_delta": (float, 1e-6, 10.0),
    "weak_law_instances": (int, 0, 10_000),
    "weak_law_deltas": ("list", float, 1e-2, 10.0, 16),
    "samples": (int, 1000, 10_000_000),
    "fannes_instances": (int, 0, 1_000_000),
    "gentle_instances": (int, 0, 1_000_000),
    "max_dim": (int, 2, 64),
    "entropy_instances": (int, 0, 10_000),
    "entropy_blocks": (int, 1, 100_000),
    "entropy_delta": (float, 1e-2, 10.0),
    "sandwich_instances": (int, 0, 100),
    "shadow_instances": (int, 0, 100_000),
}
_CONVERSE_SCHEMA = {
    "rates": ("optional-list", float, 0.0, 64.0, 64),
    "rate_factors": ("optional-list", float, 0.0, 64.0, 64),
    "ref_n": (int, 1, 6),
    "n_values": ("list", int, 1, 16, 64),
    "trials": (int, 1, 10_000),
    "ensemble_n": (int, 1, 4),
    "restarts": (int, 1, 1000),
    "max_entries": (int, 1, 2**30),
}


@dataclass
class CapacitySettings:
    n_max: int = 3
    restarts: int = 32
    max_iters: int = 500
    tol: float = 1e-9
    ensemble_size: int | None = None
    max_output_dim: int = 64


@dataclass
class LemmaSettings:
    trace_instances: int = 20
    trace_blocks: tuple = (50, 100, 200)
    trace_delta: float = 0.1
    weak_law_instances: int = 20
    weak_law_deltas: tuple = (0.3, 0.4)
    samples: int = 10_000
    fannes_instances: int = 1000
    gentle_instances: int = 1000
    max_dim: int = 8
    entropy_instances: int = 20
    entropy_blocks: int = 100
    entropy_delta: float = 0.5
    sandwich_instances: int = 4
    shadow_instances: int = 200


@dataclass
class ConverseSettings:
    rates: tuple | None = None
    rate_factors: tuple | None = (1.2, 0.5)
    ref_n: int = 2
    n_values: tuple = (2, 3, 4, 5, 6)
    trials: int = 20
    ensemble_n: int = 1
    restarts: int = 8
    max_entries: int = 2**26


@dataclass
class ExperimentConfig:
    seed: int | None = None
    channel_file: str | None = None
    output_dir: str = "results"
    threads: int = 1
    capacity: CapacitySettings = field(default_factory=CapacitySettings)
    lemmas: LemmaSettings = field(default_factory=LemmaSettings)
    converse: ConverseSettings = field(default_factory=ConverseSettings)

    def to_dict(self) -> dict:
        d = asdict(self)
        for section in ("capacity", "lemmas", "converse"):
            d[section] = {k: list(v) if isinstance(v, tuple) else v for k, v in d[section].items()}
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        """sha256 of the result-determining settings (excludes output_dir and threads)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _coerce(value, spec, where):
    kind = spec[0]
    if kind in ("optional", "optional-list") and value is None:
        return None
    if kind in ("list", "optional-list"):
        _, item, lo, hi, max_len = spec
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        if not value:
            raise ConfigError(f"{where}: list must not be empty")
        if len(value) > max_len:
            raise ConfigError(f"{where}: at most {max_len} entries")
        return tuple(_coerce(v, (item, lo, hi), f"{where}[{i}]") for i, v in enumerate(value))
    if kind == "optional":
        spec = spec[1:]
        kind = spec[0]
    _, lo, hi = spec
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not lo <= value <= hi:
        raise ConfigError(f"{where}: {value} outside [{lo}, {hi}]")
    return value


def _section(cls, schema, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{name}: unknown keys {unknown}")
    return cls(**{k: _coerce(v, schema[k], f"{name}.{k}") for k, v in raw.items()})


_TOP = {"seed", "channel_file", "output_dir", "threads", "capacity", "lemmas", "converse"}


def config_from_dict(raw) -> ExperimentConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(raw) - _TOP)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    seed = raw.get("seed")
    if seed is not None:
        seed = _coerce(seed, (int, 0, 2**63 - 1), "seed")
    threads = _coerce(raw.get("threads", 1), (int, 1, 256), "threads")
    for key in ("channel_file", "output_dir"):
        if key in raw and raw[key] is not None and not isinstance(raw[key], str):
            raise ConfigError(f"{key}: expected a path string")
    cfg = ExperimentConfig(
        seed=seed,
        channel_file=raw.get("channel_file"),
        output_dir=raw.get("output_dir") or "results",
        threads=threads,
        capacity=_section(CapacitySettings, _CAPACITY_SCHEMA, raw.get("capacity"), "capacity"),
        lemmas=_section(LemmaSettings, _LEMMA_SCHEMA, raw.get("lemmas"), "lemmas"),
        converse=_section(ConverseSettings, _CONVERSE_SCHEMA, raw.get("converse"), "converse"),
    )
    conv = cfg.converse
    given = raw.get("converse") or {}
    if "rates" in given and "rate_factors" not in given:
        conv.rate_factors = None
    if (conv.rates is None) == (conv.rate_factors is None):
        raise ConfigError("converse: give exactly one of rates and rate_factors")
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from exc
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def resolve_channel_path(cfg: ExperimentConfig, config_path=None) -> Path:
    """Channel file path, relative paths taken from the config file's directory."""
    if not cfg.channel_file:
        raise ConfigError("channel_file is required for this command")
    p = Path(cfg.channel_file)
    if not p.is_absolute() and config_path is not None:
        p = Path(config_path).parent / p
    return p
