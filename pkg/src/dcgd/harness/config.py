"""Experiment configuration."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from dcgd.optimizers import OPTIMIZERS, VARIANTS
from dcgd.problems import PROBLEMS


class ConfigError(ValueError):
    pass


def default_seed() -> int:
    raw = os.environ.get("DCGD_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"DCGD_SEED must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "helmholtz2d"
    optimizer: str = "dcgd"
    variant: str = "center"
    epochs: int = 50_000
    lr: float = 1e-3
    lr_grid: tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    decay_rate: float = 0.9
    decay_steps: int = 1000
    n_r: int = 1280
    n_b: int = 128
    hidden: tuple[int, ...] | None = None  # None: the problem's default network
    seed: int = field(default_factory=default_seed)
    trials: int = 1
    checkpoint_every: int = 100
    out: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {list(OPTIMIZERS)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.epochs < 0 or self.trials < 1 or self.n_r < 1 or self.n_b < 1:
            raise ConfigError("epochs must be >= 0 and trials, n_r, n_b >= 1")
        if not self.lr > 0:
            raise ConfigError("learning rate must be positive")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint cadence must be positive")
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "lr_grid", tuple(float(v) for v in self.lr_grid))

    def to_dict(self) -> dict:
        return asdict(self)

    def run_id(self) -> str:
        """40-hex digest of the configuration (output path excluded)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def trial_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.trials)]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        known = {f.name for f in fields(self)}
        unknown = set(kw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **kw)


def load_config_file(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data
