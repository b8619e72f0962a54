"""Hypermodel search: declarative space, Hyperband, and pruned random search.

The space covers, per family, every tuned quantity: layer counts and
per-layer units/dropout/batch-norm/L2, graph activations and skip
connections, pooling, dense stacks, optimizer and scheduler choices with
their sub-parameters, batch size, and loss. Log-scaled ranges sample
log-uniformly; conditional sub-parameters are drawn only when their parent
is chosen.

Searches are replayable: per-trial seeds derive from the root seed by a
counter scheme, and results can be persisted to JSON-lines and resumed by
replaying the file.
"""
from __future__ import annotations

import inspect
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidityError
from .models import ModelConfig
from .nn.config import LayerConfig, OptimSpec
from .utils import spawn_seed


# -- domains -----------------------------------------------------------------


@dataclass(frozen=True)
class Choice:
    options: tuple

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]

    def to_dict(self):
        return {"type": "choice", "options": list(self.options)}


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int  # inclusive

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def to_dict(self):
        return {"type": "int", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def sample(self, rng):
        return float(rng.uniform(self.lo, self.hi))

    def to_dict(self):
        return {"type": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def sample(self, rng):
        return float(np.exp(rng.uniform(np.log(self.lo), np.log(self.hi))))

    def to_dict(self):
        return {"type": "log_uniform", "lo": self.lo, "hi": self.hi}


def domain_from_dict(d: dict):
    kind = d["type"]
    if kind == "choice":
        return Choice(tuple(d["options"]))
    if kind == "int":
        return IntRange(d["lo"], d["hi"])
    if kind == "uniform":
        return Uniform(d["lo"], d["hi"])
    if kind == "log_uniform":
        return LogUniform(d["lo"], d["hi"])
    raise ConfigError(f"unknown domain type {kind!r}")


GCN_ACTIVATIONS = ("relu", "leaky_relu", "elu", "tanh", "softplus", "gelu")
LSTM_DENSE_ACTIVATIONS = ("relu", "leaky_relu", "elu", "tanh", "softplus")
GCN_SCHEDULERS = ("step", "exponential", "reduce_on_plateau", "polynomial",
                  "cosine_annealing", "cyclic", "one_cycle")
LSTM_SCHEDULERS = ("exponential", "inverse_time", "piecewise_constant", "polynomial")


@dataclass
class HyperSpace:
    """Named sampling domains plus the model family they configure."""

    family: str
    duration_aware: bool
    domains: dict = field(default_factory=dict)

    @classmethod
    def table_defaults(cls, family: str, duration_aware: bool) -> "HyperSpace":
        """Full tuning ranges for the given family."""
        if family not in ("gcn", "lstm"):
            raise ConfigError(f"unknown family {family!r}")
        is_gcn = family == "gcn"
        domains = {
            "node_layers": IntRange(1, 5 if is_gcn else 3),
            "pseudo_layers": IntRange(1, 5 if is_gcn else 3),
            "fusion_layers": IntRange(1, 5 if is_gcn else 3),
            "units": IntRange(16, 512),
            "dropout_flag": Choice((False, True)),
            "dropout_rate": Uniform(0.2, 0.7),
            "batch_norm_flag": Choice((False, True)),
            "bn_momentum": Uniform(0.1, 0.999),
            "bn_eps": LogUniform(1e-5, 1e-2),
            "l2": LogUniform(1e-5, 1e-2),
            "gcn_activation": Choice(GCN_ACTIVATIONS),
            "skip": Choice((False, True)),
            "pooling": Choice(("mean", "add", "max")),
            "case_layers": IntRange(1, 3),
            "head_layers": IntRange(1, 3),
            "dense_units": IntRange(16, 512 if is_gcn else 256),
            "dense_activation": Choice(GCN_ACTIVATIONS if is_gcn else LSTM_DENSE_ACTIVATIONS),
            "learning_rate": LogUniform(1e-5, 1e-2),
            "weight_decay": Uniform(0.0, 1e-3),
            "l1": Uniform(0.0, 1e-3),
            "optimizer": Choice(("adam", "rmsprop", "sgd")),
            "adam_beta1": Uniform(0.85, 0.99),
            "adam_beta2": Uniform(0.99, 0.9999),
            "rms_alpha": Uniform(0.9, 0.999),
            "rms_momentum": Uniform(0.0, 0.9),
            "rms_eps": LogUniform(1e-8, 1e-4),
            "sgd_momentum": Uniform(0.0, 0.99),
            "scheduler": Choice(GCN_SCHEDULERS if is_gcn else LSTM_SCHEDULERS),
            "step_size": IntRange(10, 100),
            "step_gamma": Uniform(0.1, 0.9),
            "exp_gamma": Uniform(0.9, 0.999),
            "rop_factor": Uniform(0.1, 0.8),
            "rop_patience": IntRange(5, 25),
            "rop_threshold": LogUniform(1e-4, 1e-2),
            "poly_total": IntRange(50, 300),
            "poly_power": Uniform(0.5, 2.0),
            "cos_tmax": IntRange(50, 300),
            "cos_eta_min": LogUniform(1e-7, 1e-4),
            "cyclic_factor": Uniform(2.0, 10.0),
            "cyclic_up": IntRange(10, 100),
            "oc_factor": Uniform(2.0, 10.0),
            "oc_pct": Uniform(0.1, 0.4),
            "oc_total": IntRange(100, 300),
            "it_decay": Uniform(0.01, 1.0),
            "pc_pieces": IntRange(2, 4),
            "pc_gamma": Uniform(0.3, 0.9),
            "pc_spacing": IntRange(20, 80),
            "batch_size": Choice((16, 32, 64, 128, 512)),
            "loss": Choice(("cross_entropy", "multi_margin") if is_gcn else ("cross_entropy",)),
        }
        return cls(family=family, duration_aware=duration_aware, domains=domains)

    @classmethod
    def desk(cls, family: str, duration_aware: bool) -> "HyperSpace":
        """Scaled-down ranges that keep search runs fast on small logs."""
        space = cls.table_defaults(family, duration_aware)
        space.domains.update({
            "node_layers": IntRange(1, 2),
            "pseudo_layers": IntRange(1, 1),
            "fusion_layers": IntRange(1, 1),
            "units": IntRange(16, 64),
            "dense_units": IntRange(16, 64),
            "case_layers": IntRange(1, 1),
            "head_layers": IntRange(1, 2),
            "dropout_flag": Choice((False, False, True)),
            "dropout_rate": Uniform(0.2, 0.35),
            "batch_norm_flag": Choice((False,)),
            "learning_rate": LogUniform(1e-3, 1e-2),
            "weight_decay": Uniform(0.0, 1e-4),
            "l1": Uniform(0.0, 1e-5),
            "optimizer": Choice(("adam", "rmsprop")),
            "scheduler": Choice(("exponential", "polynomial") if family == "lstm"
                                else ("exponential", "cosine_annealing")),
            "exp_gamma": Uniform(0.97, 0.999),
            "batch_size": Choice((32, 64)),
            "l2": LogUniform(1e-5, 1e-3),
        })
        return space

    def override(self, **domains) -> "HyperSpace":
        merged = dict(self.domains)
        merged.update(domains)
        return HyperSpace(self.family, self.duration_aware, merged)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "duration_aware": self.duration_aware,
            "domains": {k: v.to_dict() for k, v in sorted(self.domains.items())},
        }


def _sample_encoder_layer(space: HyperSpace, rng) -> LayerConfig:
    d = space.domains
    is_gcn = space.family == "gcn"
    dropout = d["dropout_rate"].sample(rng) if d["dropout_flag"].sample(rng) else 0.0
    bn = d["batch_norm_flag"].sample(rng)
    return LayerConfig(
        kind="gcn_conv" if is_gcn else "lstm",
        units=d["units"].sample(rng),
        activation=d["gcn_activation"].sample(rng) if is_gcn else "relu",
        dropout_rate=dropout,
        batch_norm=bn,
        bn_momentum=d["bn_momentum"].sample(rng) if bn else 0.1,
        bn_eps=d["bn_eps"].sample(rng) if bn else 1e-5,
        l2_coeff=0.0 if is_gcn else d["l2"].sample(rng),
        skip_connection=d["skip"].sample(rng) if is_gcn else False,
    )


def _sample_dense_layer(space: HyperSpace, rng) -> LayerConfig:
    d = space.domains
    dropout = d["dropout_rate"].sample(rng) if d["dropout_flag"].sample(rng) else 0.0
    bn = d["batch_norm_flag"].sample(rng)
    return LayerConfig(
        kind="dense",
        units=d["dense_units"].sample(rng),
        activation=d["dense_activation"].sample(rng),
        dropout_rate=dropout,
        batch_norm=bn,
        bn_momentum=d["bn_momentum"].sample(rng) if bn else 0.1,
        bn_eps=d["bn_eps"].sample(rng) if bn else 1e-5,
        l2_coeff=0.0 if space.family == "gcn" else d["l2"].sample(rng),
    )


def _sample_optim(space: HyperSpace, rng, lr: float) -> OptimSpec:
    d = space.domains
    optimizer = d["optimizer"].sample(rng)
    kwargs: dict = {}
    if optimizer == "adam":
        kwargs["betas"] = (d["adam_beta1"].sample(rng), d["adam_beta2"].sample(rng))
    elif optimizer == "rmsprop":
        kwargs["alpha"] = d["rms_alpha"].sample(rng)
        kwargs["momentum"] = d["rms_momentum"].sample(rng)
        kwargs["eps"] = d["rms_eps"].sample(rng)
    else:
        kwargs["momentum"] = d["sgd_momentum"].sample(rng)

    scheduler = d["scheduler"].sample(rng)
    sp: dict = {}
    if scheduler == "step":
        sp = {"step_size": d["step_size"].sample(rng), "gamma": d["step_gamma"].sample(rng)}
    elif scheduler == "exponential":
        sp = {"gamma": d["exp_gamma"].sample(rng)}
    elif scheduler == "reduce_on_plateau":
        sp = {"factor": d["rop_factor"].sample(rng), "patience": d["rop_patience"].sample(rng),
              "threshold": d["rop_threshold"].sample(rng)}
    elif scheduler == "polynomial":
        sp = {"total_iters": d["poly_total"].sample(rng), "power": d["poly_power"].sample(rng)}
    elif scheduler == "cosine_annealing":
        sp = {"t_max": d["cos_tmax"].sample(rng), "eta_min": d["cos_eta_min"].sample(rng)}
    elif scheduler == "cyclic":
        sp = {"max_lr": lr * d["cyclic_factor"].sample(rng), "step_size_up": d["cyclic_up"].sample(rng)}
    elif scheduler == "one_cycle":
        sp = {"max_lr": lr * d["oc_factor"].sample(rng), "pct_start": d["oc_pct"].sample(rng),
              "total_steps": d["oc_total"].sample(rng)}
    elif scheduler == "inverse_time":
        sp = {"decay_rate": d["it_decay"].sample(rng)}
    elif scheduler == "piecewise_constant":
        pieces = d["pc_pieces"].sample(rng)
        gamma = d["pc_gamma"].sample(rng)
        spacing = d["pc_spacing"].sample(rng)
        sp = {"boundaries": [spacing * (k + 1) for k in range(pieces - 1)],
              "values": [lr * gamma ** k for k in range(pieces)]}

    return OptimSpec(
        optimizer=optimizer, learning_rate=lr,
        weight_decay=d["weight_decay"].sample(rng), l1_coeff=d["l1"].sample(rng),
        scheduler=scheduler, scheduler_params=sp, **kwargs,
    )


def sample_config(space: HyperSpace, rng: np.random.Generator) -> ModelConfig:
    """Draw one model configuration; always valid against ModelConfig rules."""
    d = space.domains
    node = [_sample_encoder_layer(space, rng) for _ in range(d["node_layers"].sample(rng))]
    pseudo = fusion = None
    if space.duration_aware:
        pseudo = [_sample_encoder_layer(space, rng) for _ in range(d["pseudo_layers"].sample(rng))]
        fusion = [_sample_encoder_layer(space, rng) for _ in range(d["fusion_layers"].sample(rng))]
    case = [_sample_dense_layer(space, rng) for _ in range(d["case_layers"].sample(rng))]
    head = [_sample_dense_layer(space, rng) for _ in range(d["head_layers"].sample(rng))]
    lr = d["learning_rate"].sample(rng)
    return ModelConfig(
        family=space.family,
        duration_aware=space.duration_aware,
        node_layers=node,
        pseudo_layers=pseudo,
        fusion_layers=fusion or [],
        case_layers=case,
        head_layers=head,
        pooling=d["pooling"].sample(rng) if space.family == "gcn" else "mean",
        optim=_sample_optim(space, rng, lr),
        batch_size=d["batch_size"].sample(rng),
        loss=d["loss"].sample(rng),
    )


# -- trial bookkeeping ---------------------------------------------------------


@dataclass
class TrialResult:
    trial_id: int
    config: ModelConfig
    objective_value: float
    best_epoch: int
    epochs_run: int
    status: str  # completed | pruned | failed
    seed: int
    budget: int
    extra: dict = field(default_factory=dict)

    def to_json_line(self) -> str:
        return json.dumps({
            "trial_id": self.trial_id,
            "config": self.config.to_dict(),
            "objective_value": self.objective_value,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "status": self.status,
            "seed": self.seed,
            "budget": self.budget,
            "extra": self.extra,
        }, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "TrialResult":
        d = json.loads(line)
        return cls(
            trial_id=d["trial_id"], config=ModelConfig.from_dict(d["config"]),
            objective_value=d["objective_value"], best_epoch=d["best_epoch"],
            epochs_run=d["epochs_run"], status=d["status"], seed=d["seed"],
            budget=d["budget"], extra=d.get("extra", {}),
        )


@dataclass
class TrialOutcome:
    """What a trainer reports back for one training run."""

    objective: float
    best_epoch: int = 0
    epochs_run: int = 0
    pruned: bool = False


def _coerce_outcome(value) -> TrialOutcome:
    if isinstance(value, TrialOutcome):
        return value
    return TrialOutcome(objective=float(value))


def _call_trainer(trainer, config, budget, seed, patience=None):
    kwargs = {}
    if patience is not None and "patience" in inspect.signature(trainer).parameters:
        kwargs["patience"] = patience
    return _coerce_outcome(trainer(config, budget, seed, **kwargs))


def make_model_trainer(train_reps, val_reps, *, objective: str = "accuracy",
                       target_objective: float | None = None, pruner=None):
    """Trainer closure over a fixed dataset, suitable for both searches."""
    from .models import build_model, infer_dims, train_model

    dims = infer_dims(list(train_reps) + list(val_reps))

    def trainer(config: ModelConfig, budget: int, seed: int, patience: int | None = None) -> TrialOutcome:
        net = build_model(config, dims, seed=seed)
        result = train_model(
            net, list(train_reps), list(val_reps), epochs=budget,
            objective=objective, patience=patience, seed=seed,
            target_objective=target_objective, pruner=pruner,
        )
        return TrialOutcome(
            objective=result.best_objective, best_epoch=result.best_epoch,
            epochs_run=result.epochs_run, pruned=result.pruned,
        )

    return trainer


def select_objective(label_histogram: dict, balance_ratio_threshold: float = 1.5) -> str:
    """Accuracy for balanced label distributions, weighted F1 otherwise."""
    counts = [c for c in label_histogram.values() if c > 0]
    if len(counts) < 2:
        raise ValidityError("objective selection needs at least two populated classes")
    ratio = max(counts) / min(counts)
    return "accuracy" if ratio <= balance_ratio_threshold else "weighted_f1"


def best_result(results: list[TrialResult]) -> TrialResult:
    """Best completed trial by objective; trial id breaks ties."""
    eligible = [r for r in results if r.status == "completed"]
    if not eligible:
        raise ValidityError("no completed trials")
    return max(eligible, key=lambda r: (r.objective_value, -r.trial_id))


class _ResultLog:
    def __init__(self, path):
        self.path = path
        self.replayed: dict[str, TrialResult] = {}
        if path is not None:
            try:
                with open(path) as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            r = TrialResult.from_json_line(line)
                            self.replayed[r.extra.get("key", str(r.trial_id))] = r
            except FileNotFoundError:
                pass

    def lookup(self, key: str) -> TrialResult | None:
        return self.replayed.get(key)

    def append(self, result: TrialResult) -> None:
        if self.path is None:
            return
        with open(self.path, "a") as fh:
            fh.write(result.to_json_line() + "\n")


# -- hyperband -----------------------------------------------------------------


def hyperband_schedule(max_epochs: int, eta: int = 3) -> list[dict]:
    """Bracket/rung plan: config counts and epoch budgets per rung."""
    if max_epochs < 1 or eta < 2:
        raise ConfigError("max_epochs must be >= 1 and eta >= 2")
    s_max = int(math.floor(math.log(max_epochs) / math.log(eta)))
    budget = (s_max + 1) * max_epochs
    brackets = []
    for s in range(s_max, -1, -1):
        n = int(math.ceil(budget * eta ** s / (max_epochs * (s + 1))))
        r = max_epochs * eta ** (-s)
        rungs = []
        for i in range(s + 1):
            n_i = int(math.floor(n * eta ** (-i)))
            r_i = max(1, int(math.floor(r * eta ** i)))
            rungs.append({"n_configs": max(1, n_i), "epochs": r_i})
        brackets.append({"s": s, "n": n, "rungs": rungs, "total_epochs": sum(
            rung["n_configs"] * rung["epochs"] for rung in rungs)})
    return brackets


def hyperband(space: HyperSpace, trainer, max_epochs: int = 300, eta: int = 3,
              objective: str = "accuracy", seed: int = 0, brackets: list[int] | None = None,
              results_path=None) -> tuple[TrialResult, list[TrialResult]]:
    """Successive-halving sweep over the standard bracket schedule.

    Every rung retrains its surviving configs from scratch at the rung's
    epoch budget under the config's own seed, so any recorded result can be
    replayed exactly. Trainer failures mark the trial failed and the
    bracket continues. Best is the maximum objective over all completed
    rung evaluations.
    """
    schedule = hyperband_schedule(max_epochs, eta)
    if brackets is not None:
        schedule = [b for b in schedule if b["s"] in set(brackets)]
    rng = np.random.default_rng(spawn_seed(seed, 0))
    log = _ResultLog(results_path)

    results: list[TrialResult] = []
    trial_id = 0
    config_counter = 0
    for bracket in schedule:
        configs = []
        for _ in range(bracket["n"]):
            configs.append((config_counter, sample_config(space, rng)))
            config_counter += 1
        survivors = configs
        for rung_idx, rung in enumerate(bracket["rungs"]):
            epochs = rung["epochs"]
            rung_results = []
            for config_id, config in survivors:
                key = f"b{bracket['s']}-r{rung_idx}-c{config_id}"
                cached = log.lookup(key)
                if cached is not None:
                    cached.trial_id = trial_id
                    result = cached
                else:
                    config_seed = spawn_seed(seed, config_id + 1)
                    try:
                        outcome = _call_trainer(trainer, config, epochs, config_seed)
                        result = TrialResult(
                            trial_id=trial_id, config=config,
                            objective_value=outcome.objective,
                            best_epoch=outcome.best_epoch,
                            epochs_run=outcome.epochs_run or epochs,
                            status="pruned" if outcome.pruned else "completed",
                            seed=config_seed, budget=epochs,
                            extra={"bracket": bracket["s"], "rung": rung_idx,
                                   "config_id": config_id, "key": key},
                        )
                    except Exception as exc:  # noqa: BLE001 - trial isolation
                        result = TrialResult(
                            trial_id=trial_id, config=config, objective_value=-math.inf,
                            best_epoch=-1, epochs_run=0, status="failed",
                            seed=spawn_seed(seed, config_id + 1), budget=epochs,
                            extra={"bracket": bracket["s"], "rung": rung_idx,
                                   "config_id": config_id, "key": key, "error": repr(exc)},
                        )
                    log.append(result)
                trial_id += 1
                results.append(result)
                rung_results.append((config_id, config, result))

            if rung_idx < len(bracket["rungs"]) - 1:
                keep = bracket["rungs"][rung_idx + 1]["n_configs"]
                ranked = sorted(
                    (t for t in rung_results if t[2].status == "completed"),
                    key=lambda t: (-t[2].objective_value, t[2].trial_id),
                )
                survivors = [(cid, cfg) for cid, cfg, _ in ranked[:keep]]
                if not survivors:
                    break

    return best_result(results), results


# -- pruned random search --------------------------------------------------------


def pruned_search(space: HyperSpace, trainer, n_trials: int = 200, max_epochs: int = 300,
                  patience: int = 30, objective: str = "accuracy", seed: int = 0,
                  results_path=None, jobs: int = 1) -> tuple[TrialResult, list[TrialResult]]:
    """Independent random trials with early stopping.

    A trial stops once the objective has not improved for `patience`
    epochs; that still counts as completed (the stop is part of the
    training procedure). `pruned` status is reserved for trials cut off by
    an external pruner hook inside the trainer, and such trials are never
    selected as best.
    """
    rng = np.random.default_rng(spawn_seed(seed, 0))
    configs = [sample_config(space, rng) for _ in range(n_trials)]
    log = _ResultLog(results_path)

    def run_one(idx: int) -> TrialResult:
        key = f"t{idx}"
        cached = log.lookup(key)
        if cached is not None:
            return cached
        config_seed = spawn_seed(seed, idx + 1)
        try:
            outcome = _call_trainer(trainer, configs[idx], max_epochs, config_seed, patience=patience)
            result = TrialResult(
                trial_id=idx, config=configs[idx], objective_value=outcome.objective,
                best_epoch=outcome.best_epoch, epochs_run=outcome.epochs_run or max_epochs,
                status="pruned" if outcome.pruned else "completed",
                seed=config_seed, budget=max_epochs, extra={"key": key},
            )
        except Exception as exc:  # noqa: BLE001 - trial isolation
            result = TrialResult(
                trial_id=idx, config=configs[idx], objective_value=-math.inf,
                best_epoch=-1, epochs_run=0, status="failed", seed=config_seed,
                budget=max_epochs, extra={"key": key, "error": repr(exc)},
            )
        return result

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, range(n_trials)))
    else:
        results = [run_one(i) for i in range(n_trials)]
    for r in results:
        if log.lookup(r.extra.get("key", "")) is None:
            log.append(r)
    return best_result(results), results
