"""Run configuration: INI file with sections, overridable from the command line."""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields
from typing import Optional

SECTIONS = {
    "inputs": ("alignments", "embeddings", "piles", "model"),
    "output": ("out_dir", "plot_jitter", "jitter_scale", "jitter_seed"),
    "beliefs": ("gamma", "prior"),
    "frontier": ("n_betas", "beta_min", "beta_max", "tol", "max_iters", "annealing_jitter",
                 "frontier_seed", "max_words"),
    "baselines": ("fractions", "perturbed_count", "random_count", "baseline_seed", "soft_random"),
    "similarity": ("folds", "cv_seed", "train_seed", "ranks", "penalties", "alphas"),
    "select": ("k", "select_seed"),
    "run": ("threads", "strict"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    alignments: Optional[str] = None
    embeddings: Optional[str] = None
    piles: Optional[str] = None
    model: Optional[str] = None

    out_dir: str = "out"
    plot_jitter: bool = False
    jitter_scale: float = 0.01
    jitter_seed: int = 0

    gamma: float = 1.0
    prior: str = "uniform"

    n_betas: int = 100
    beta_min: float = 1.0
    beta_max: float = 2.0 ** 20
    tol: float = 1e-8
    max_iters: int = 10_000
    annealing_jitter: float = 1e-3
    frontier_seed: int = 0
    max_words: int = 0

    fractions: tuple = (0.01, 0.05, 0.10)
    perturbed_count: int = 10_000
    random_count: int = 300_000
    baseline_seed: int = 0
    soft_random: bool = False

    folds: int = 6
    cv_seed: int = 0
    train_seed: int = 0
    ranks: tuple = (1, 5, 10, 15, 20, 50, 100)
    penalties: tuple = (1e-3, 1e-1, 10.0)
    alphas: tuple = (1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)

    k: int = 30
    select_seed: int = 0

    threads: int = 1
    strict: bool = False

    def validate(self):
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise ConfigError(f"perturbation fraction {f} outside [0, 1]")
        if self.prior not in ("uniform", "frequency"):
            raise ConfigError(f"prior must be 'uniform' or 'frequency', not {self.prior!r}")
        if not (0 < self.beta_min <= self.beta_max):
            raise ConfigError("need 0 < beta_min <= beta_max")
        if self.n_betas < 1 or self.max_iters < 1 or self.tol <= 0:
            raise ConfigError("n_betas, max_iters and tol must be positive")
        if self.perturbed_count < 0 or self.random_count < 0:
            raise ConfigError("sample counts must be non-negative")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if any(r < 1 for r in self.ranks) or any(p < 0 for p in self.penalties):
            raise ConfigError("ranks must be >= 1 and penalties >= 0")
        if any(a <= 0 for a in self.alphas):
            raise ConfigError("ridge alphas must be > 0")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_ini(self):
        cp = configparser.ConfigParser()
        for section, keys in SECTIONS.items():
            cp[section] = {}
            for k in keys:
                v = getattr(self, k)
                if v is None:
                    continue
                cp[section][k] = _format(v)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_TYPES = {f.name: f for f in fields(RunConfig)}


def _format(v):
    if isinstance(v, (tuple, list)):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def coerce(name, raw):
    """Convert a raw string (or value) to the declared type of field ``name``."""
    if name not in _TYPES:
        raise ConfigError(f"unknown configuration key {name!r}")
    default = _TYPES[name].default
    if raw is None:
        return None
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            elem = type(default[0]) if default else float
            return tuple(elem(x.strip()) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from None
    return raw


def load_config(path=None, overrides=None):
    """Defaults, then the INI file, then ``overrides`` (flags win)."""
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for section in cp.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in cp[section].items():
                if key not in SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                values[key] = coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw)
    return RunConfig(**values).validate()
