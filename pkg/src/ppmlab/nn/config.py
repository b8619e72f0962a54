"""Declarative layer and optimizer configuration."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

ACTIVATIONS = ("relu", "leaky_relu", "elu", "tanh", "softplus", "gelu", "identity")
OPTIMIZERS = ("adam", "rmsprop", "sgd")
SCHEDULERS = (
    "step", "exponential", "reduce_on_plateau", "polynomial", "cosine_annealing",
    "cyclic", "one_cycle", "inverse_time", "piecewise_constant",
)
LOSSES = ("cross_entropy", "multi_margin")
POOLINGS = ("mean", "add", "max")


@dataclass
class LayerConfig:
    """One layer of any kind: dense, gcn_conv, or lstm."""

    kind: str
    units: int
    activation: str = "relu"
    dropout_rate: float = 0.0
    batch_norm: bool = False
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    l2_coeff: float = 0.0
    skip_connection: bool = False

    def __post_init__(self):
        if self.kind not in ("dense", "gcn_conv", "lstm"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.units < 1:
            raise ConfigError("units must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.bn_eps <= 0:
            raise ConfigError("bn_eps must be > 0")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "units": self.units, "activation": self.activation,
            "dropout_rate": self.dropout_rate, "batch_norm": self.batch_norm,
            "bn_momentum": self.bn_momentum, "bn_eps": self.bn_eps,
            "l2_coeff": self.l2_coeff, "skip_connection": self.skip_connection,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerConfig":
        return cls(**d)


@dataclass
class OptimSpec:
    """Optimizer plus learning-rate schedule selection."""

    optimizer: str = "adam"
    learning_rate: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)  # adam
    alpha: float = 0.99  # rmsprop smoothing
    momentum: float = 0.0  # rmsprop / sgd
    eps: float = 1e-8
    weight_decay: float = 0.0
    l1_coeff: float = 0.0
    scheduler: str | None = None
    scheduler_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.weight_decay < 0 or self.l1_coeff < 0:
            raise ConfigError("weight_decay and l1_coeff must be >= 0")
        if self.scheduler is not None and self.scheduler not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        self.betas = tuple(self.betas)

    def to_dict(self) -> dict:
        return {
            "optimizer": self.optimizer, "learning_rate": self.learning_rate,
            "betas": list(self.betas), "alpha": self.alpha, "momentum": self.momentum,
            "eps": self.eps, "weight_decay": self.weight_decay, "l1_coeff": self.l1_coeff,
            "scheduler": self.scheduler, "scheduler_params": dict(self.scheduler_params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimSpec":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)
