"""Experiment configuration: one JSON file drives a whole run.

The schema is deliberately flat and explicit — every knob that affects a
result is in the file, so a config plus a root seed fully determines a
run.  `ConfigError` is raised for anything malformed; the CLI maps it to
its config-error exit code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .losses import LossGenome
from .training import METRICS, TrainConfig

__all__ = [
    "ConfigError", "Stage1Config", "Stage2Config", "ExperimentConfig",
    "load_config", "config_from_dict", "config_to_dict", "save_config",
    "config_hash", "write_genome", "read_genome",
]

PROBLEMS = ("heat_annulus", "poisson_source", "darcy_flow")
SPACES = ("cnn_stack", "unet_entire", "unet_cell")
STRATEGIES = ("rl", "enas", "darts")


class ConfigError(ValueError):
    """Configuration file missing, unparsable, or schema-invalid."""


@dataclass
class Stage1Config:
    budget: int = 8
    workers: int = 1
    epochs: int = 40             # per-trial training epochs
    n_seed: int = 4              # random trials before the surrogate takes over
    panel: int = 0               # 0: one default-choices network scores each
    #                              candidate; n>0: average over n random ones
    batch_size: int = 0
    lr: float = 1e-3
    constraints: tuple = ()      # optional candidate-space restrictions;
    families: tuple = ()         # empty means "all"
    unaries: tuple = ()
    weight_ops: tuple = ()


@dataclass
class Stage2Config:
    strategy: str = "rl"
    budget: int = 6              # multi-trial: trials; enas/darts: steps
    epochs: int = 30             # per-trial epochs (multi-trial only)
    batch_size: int = 0
    lr: float = 1e-3


@dataclass
class ExperimentConfig:
    problem: str = "heat_annulus"
    problem_kwargs: dict = field(default_factory=dict)
    seed: int = 0
    space: str = "cnn_stack"
    stage1: Stage1Config = field(default_factory=Stage1Config)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    train: TrainConfig = field(default_factory=TrainConfig)
    metric: str = "relative_l2"
    out_dir: str = "run"

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, "
                              f"got {self.problem!r}")
        if self.space not in SPACES:
            raise ConfigError(f"space must be one of {SPACES}, "
                              f"got {self.space!r}")
        if self.stage2.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, "
                              f"got {self.stage2.strategy!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {sorted(METRICS)}, "
                              f"got {self.metric!r}")
        for name, value in [("stage1.budget", self.stage1.budget),
                            ("stage1.workers", self.stage1.workers),
                            ("stage1.epochs", self.stage1.epochs),
                            ("stage2.budget", self.stage2.budget)]:
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.stage1.panel < 0:
            raise ConfigError("stage1.panel must be >= 0")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        return self


def _build_section(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v
                      for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = dict(data)
    for key, cls in (("stage1", Stage1Config), ("stage2", Stage2Config),
                     ("train", TrainConfig)):
        if key in kwargs:
            kwargs[key] = _build_section(cls, kwargs[key], key)
    try:
        cfg = ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def config_to_dict(cfg):
    return asdict(cfg)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg):
    """Stable digest of the full configuration (seeds included)."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_genome(genome, path):
    with open(path, "w") as fh:
        json.dump(asdict(genome), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_genome(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read genome {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"genome {path} is not valid JSON: {exc}") from exc
    try:
        return LossGenome(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad genome in {path}: {exc}") from exc
