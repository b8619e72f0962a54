"""The four outcome classifiers: baseline and duration-aware, graph and
sequence families.

Baselines run one encoder branch over the event channel, pool (graphs) or
take the final hidden state (sequences) into a trace vector z, encode the
case attributes through dense layers into v, and predict from the
concatenation of z and v. Duration-aware variants add a second encoder
branch over the pseudo-embedding channel; the two branches' hidden
representations are concatenated per node/step and passed through further
convolution/recurrent layers before pooling and fusion.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigError, ContractError, NumericError, TrainingDiverged
from .metrics import resolve_objective
from .nn.config import LOSSES, POOLINGS, LayerConfig, OptimSpec
from .nn.layers import DenseBlock, GCNConv, LSTMLayer, normalized_propagation
from .nn.losses import make_loss
from .nn.optim import make_optimizer, make_scheduler
from .nn.tensor import Parameter, Tensor, concat, segment_pool
from .representations import CaseGraph, CaseSequence

BATCH_SIZES = (16, 32, 64, 128, 512)
MAX_LAYERS = {"gcn": 5, "lstm": 3}
MAX_DENSE = 3


@dataclass
class ModelConfig:
    family: str
    duration_aware: bool
    node_layers: list[LayerConfig]
    pseudo_layers: list[LayerConfig] | None = None
    fusion_layers: list[LayerConfig] = field(default_factory=list)
    case_layers: list[LayerConfig] = field(default_factory=list)
    head_layers: list[LayerConfig] = field(default_factory=list)
    pooling: str = "mean"
    optim: OptimSpec = field(default_factory=OptimSpec)
    batch_size: int = 32
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.family not in MAX_LAYERS:
            raise ConfigError(f"unknown model family {self.family!r}")
        limit = MAX_LAYERS[self.family]
        kind = "gcn_conv" if self.family == "gcn" else "lstm"
        self._check_stack("node_layers", self.node_layers, 1, limit, kind)
        if self.duration_aware:
            if not self.pseudo_layers:
                raise ConfigError("duration-aware models require pseudo_layers")
            self._check_stack("pseudo_layers", self.pseudo_layers, 1, limit, kind)
            self._check_stack("fusion_layers", self.fusion_layers, 1, limit, kind)
        else:
            if self.pseudo_layers:
                raise ConfigError("baseline models must not define pseudo_layers")
            if self.fusion_layers:
                raise ConfigError("baseline models must not define fusion_layers")
        self._check_stack("case_layers", self.case_layers, 0, MAX_DENSE, "dense")
        self._check_stack("head_layers", self.head_layers, 1, MAX_DENSE, "dense")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"unknown pooling {self.pooling!r}")
        if self.batch_size not in BATCH_SIZES:
            raise ConfigError(f"batch_size must be one of {BATCH_SIZES}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")

    @staticmethod
    def _check_stack(name, layers, lo, hi, kind):
        if not lo <= len(layers) <= hi:
            raise ConfigError(f"{name} must have between {lo} and {hi} layers, got {len(layers)}")
        for layer in layers:
            if layer.kind != kind:
                raise ConfigError(f"{name} expects {kind} layers, got {layer.kind!r}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "duration_aware": self.duration_aware,
            "node_layers": [l.to_dict() for l in self.node_layers],
            "pseudo_layers": None if self.pseudo_layers is None else [l.to_dict() for l in self.pseudo_layers],
            "fusion_layers": [l.to_dict() for l in self.fusion_layers],
            "case_layers": [l.to_dict() for l in self.case_layers],
            "head_layers": [l.to_dict() for l in self.head_layers],
            "pooling": self.pooling,
            "optim": self.optim.to_dict(),
            "batch_size": self.batch_size,
            "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            family=d["family"],
            duration_aware=d["duration_aware"],
            node_layers=[LayerConfig.from_dict(l) for l in d["node_layers"]],
            pseudo_layers=None if d.get("pseudo_layers") is None else [LayerConfig.from_dict(l) for l in d["pseudo_layers"]],
            fusion_layers=[LayerConfig.from_dict(l) for l in d.get("fusion_layers", [])],
            case_layers=[LayerConfig.from_dict(l) for l in d.get("case_layers", [])],
            head_layers=[LayerConfig.from_dict(l) for l in d.get("head_layers", [])],
            pooling=d.get("pooling", "mean"),
            optim=OptimSpec.from_dict(d.get("optim", {})),
            batch_size=d.get("batch_size", 32),
            loss=d.get("loss", "cross_entropy"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))


def load_fixture_config(name: str) -> ModelConfig:
    """Load one of the packaged example configurations by file stem."""
    from importlib.resources import files

    path = files("ppmlab.configs").joinpath(f"{name}.json")
    try:
        return ModelConfig.from_json(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no fixture config named {name!r}") from exc


def desk_config(family: str, duration_aware: bool, *, units: int = 32,
                learning_rate: float = 5e-3, batch_size: int = 64) -> ModelConfig:
    """Small fixed configuration that trains fast on desk-scale logs."""
    kind = "gcn_conv" if family == "gcn" else "lstm"
    enc = lambda u: LayerConfig(kind=kind, units=u, activation="relu")
    cfg = dict(
        family=family,
        duration_aware=duration_aware,
        case_layers=[LayerConfig(kind="dense", units=16, activation="relu")],
        head_layers=[LayerConfig(kind="dense", units=units, activation="relu")],
        pooling="mean",
        optim=OptimSpec(optimizer="adam", learning_rate=learning_rate),
        batch_size=batch_size,
        loss="cross_entropy",
    )
    if duration_aware:
        return ModelConfig(node_layers=[enc(units)], pseudo_layers=[enc(units)],
                           fusion_layers=[enc(units)], **cfg)
    return ModelConfig(node_layers=[enc(units), enc(units)] if family == "gcn" else [enc(units)], **cfg)


@dataclass(frozen=True)
class InputDims:
    node_dim: int
    pseudo_dim: int
    case_dim: int
    n_classes: int


def infer_dims(reps: list, n_classes: int | None = None) -> InputDims:
    first = reps[0]
    if isinstance(first, CaseGraph):
        node_dim = first.node_matrix.shape[1]
        pseudo_dim = 0 if first.pseudo_matrix is None else first.pseudo_matrix.shape[1]
    else:
        node_dim = first.seq_matrix.shape[1]
        pseudo_dim = 0 if first.pseudo_seq is None else first.pseudo_seq.shape[1]
    if n_classes is None:
        n_classes = max(r.outcome_index for r in reps) + 1
    return InputDims(node_dim, pseudo_dim, first.case_vector.shape[0], n_classes)


# -- batching ----------------------------------------------------------------


@dataclass
class GraphBatch:
    nodes: np.ndarray
    pseudo: np.ndarray | None
    ranges: list[tuple[int, int]]
    prop: tuple
    case_vec: np.ndarray
    y: np.ndarray


@dataclass
class SequenceBatch:
    seq: np.ndarray  # (B, T, D)
    mask: np.ndarray  # (B, T) bool
    pseudo: np.ndarray | None  # (B, T, K)
    case_vec: np.ndarray
    y: np.ndarray


def collate(reps: list, need_pseudo: bool):
    first = reps[0]
    if isinstance(first, CaseGraph):
        if any(not isinstance(r, CaseGraph) for r in reps):
            raise ContractError("mixed representation families in one batch")
        return _collate_graphs(reps, need_pseudo)
    if any(not isinstance(r, CaseSequence) for r in reps):
        raise ContractError("mixed representation families in one batch")
    return _collate_sequences(reps, need_pseudo)


def _require_pseudo(rep, channel):
    if channel is None:
        raise ConfigError(f"duration-aware model but case {rep.case_id!r} has no pseudo channel")
    return channel


def _collate_graphs(reps: list[CaseGraph], need_pseudo: bool) -> GraphBatch:
    nodes = np.concatenate([r.node_matrix for r in reps])
    ranges = []
    edge_cols = []
    weights = []
    offset = 0
    for r in reps:
        n = r.n_events
        ranges.append((offset, offset + n))
        if r.edge_index.size:
            edge_cols.append(r.edge_index + offset)
            weights.append(r.edge_weight)
        offset += n
    if edge_cols:
        edge_index = np.concatenate(edge_cols, axis=1)
        edge_weight = np.concatenate(weights)
    else:
        edge_index = np.zeros((2, 0), dtype=int)
        edge_weight = np.zeros(0)
    rows, cols, vals = normalized_propagation(edge_index, edge_weight, offset)
    pseudo = None
    if need_pseudo:
        pseudo = np.concatenate([_require_pseudo(r, r.pseudo_matrix) for r in reps])
    return GraphBatch(
        nodes=nodes,
        pseudo=pseudo,
        ranges=ranges,
        prop=(rows, cols, vals, offset),
        case_vec=np.stack([r.case_vector for r in reps]),
        y=np.array([r.outcome_index for r in reps]),
    )


def _collate_sequences(reps: list[CaseSequence], need_pseudo: bool) -> SequenceBatch:
    lengths = {r.seq_matrix.shape[0] for r in reps}
    if len(lengths) != 1:
        raise ContractError("sequences in one batch must share max_len")
    pseudo = None
    if need_pseudo:
        pseudo = np.stack([_require_pseudo(r, r.pseudo_seq) for r in reps])
    return SequenceBatch(
        seq=np.stack([r.seq_matrix for r in reps]),
        mask=np.stack([r.mask for r in reps]),
        pseudo=pseudo,
        case_vec=np.stack([r.case_vector for r in reps]),
        y=np.array([r.outcome_index for r in reps]),
    )


# -- networks ----------------------------------------------------------------


class _DenseStack:
    def __init__(self, in_dim, layer_cfgs, rng, name):
        self.blocks = []
        for i, cfg in enumerate(layer_cfgs):
            self.blocks.append(DenseBlock(in_dim, cfg, rng, f"{name}.{i}"))
            in_dim = cfg.units
        self.out_dim = in_dim

    def __call__(self, x):
        for blk in self.blocks:
            x = blk(x)
        return x

    def parameters(self):
        return [p for blk in self.blocks for p in blk.parameters()]

    def batch_norms(self):
        return [bn for blk in self.blocks for bn in blk.batch_norms()]

    def train_mode(self, training):
        for blk in self.blocks:
            blk.train_mode(training)


class _GcnStack:
    def __init__(self, in_dim, layer_cfgs, rng, name):
        self.layers = []
        for i, cfg in enumerate(layer_cfgs):
            self.layers.append(GCNConv(in_dim, cfg.units, cfg, rng, f"{name}.{i}"))
            in_dim = cfg.units
        self.out_dim = in_dim

    def __call__(self, x, prop):
        for layer in self.layers:
            x = layer(x, prop)
        return x

    def parameters(self):
        return [p for l in self.layers for p in l.parameters()]

    def batch_norms(self):
        return [bn for l in self.layers for bn in l.batch_norms()]

    def train_mode(self, training):
        for layer in self.layers:
            layer.train_mode(training)


class _LstmStack:
    def __init__(self, in_dim, layer_cfgs, rng, name):
        self.layers = []
        for i, cfg in enumerate(layer_cfgs):
            self.layers.append(LSTMLayer(in_dim, cfg.units, cfg, rng, f"{name}.{i}"))
            in_dim = cfg.units
        self.out_dim = in_dim

    def __call__(self, steps, mask):
        final = None
        for layer in self.layers:
            steps, final = layer(steps, mask)
        return steps, final

    def parameters(self):
        return [p for l in self.layers for p in l.parameters()]

    def batch_norms(self):
        return [bn for l in self.layers for bn in l.batch_norms()]

    def train_mode(self, training):
        for layer in self.layers:
            layer.train_mode(training)


class _NetBase:
    def __init__(self, config: ModelConfig, dims: InputDims, seed: int):
        self.config = config
        self.dims = dims
        self.rng = np.random.default_rng(seed)

    def _build_tail(self, z_dim: int):
        rng = self.rng
        self.case_stack = _DenseStack(self.dims.case_dim, self.config.case_layers, rng, "case") \
            if self.dims.case_dim > 0 else None
        fused = z_dim + (self.case_stack.out_dim if self.case_stack else 0)
        self.head_stack = _DenseStack(fused, self.config.head_layers, rng, "head")
        k = 1.0 / np.sqrt(self.head_stack.out_dim)
        self.out_w = Parameter(rng.uniform(-k, k, size=(self.head_stack.out_dim, self.dims.n_classes)), name="out.w")
        self.out_b = Parameter(np.zeros(self.dims.n_classes), name="out.b")

    def _fuse(self, z: Tensor, case_vec: np.ndarray) -> tuple[Tensor, Tensor | None]:
        if self.case_stack is None:
            return z, None
        v = self.case_stack(Tensor(case_vec))
        return concat([z, v], axis=1), v

    def _finish(self, z: Tensor, case_vec: np.ndarray) -> Tensor:
        fused, _ = self._fuse(z, case_vec)
        h = self.head_stack(fused)
        return h @ self.out_w + self.out_b

    def trace_representation(self, batch) -> dict[str, np.ndarray]:
        """Eval-mode view of the fused trace vectors, for inspection."""
        self.train_mode(False)
        z = self.encode(batch)
        fused, v = self._fuse(z, batch.case_vec)
        out = {"z": z.data, "fused": fused.data}
        if v is not None:
            out["case_dense"] = v.data
        return out

    def _tail_parameters(self):
        params = []
        if self.case_stack is not None:
            params += self.case_stack.parameters()
        params += self.head_stack.parameters()
        params += [self.out_w, self.out_b]
        return params

    def batch_norms(self):
        stacks = [self.node_stack, self.pseudo_stack, self.fusion_stack,
                  self.case_stack, self.head_stack]
        return [bn for stack in stacks if stack is not None for bn in stack.batch_norms()]

    def _tail_train_mode(self, training):
        if self.case_stack is not None:
            self.case_stack.train_mode(training)
        self.head_stack.train_mode(training)


class GraphNet(_NetBase):
    def __init__(self, config, dims, seed):
        super().__init__(config, dims, seed)
        rng = self.rng
        self.node_stack = _GcnStack(dims.node_dim, config.node_layers, rng, "node")
        self.pseudo_stack = None
        self.fusion_stack = None
        z_dim = self.node_stack.out_dim
        if config.duration_aware:
            self.pseudo_stack = _GcnStack(dims.pseudo_dim, config.pseudo_layers, rng, "pseudo")
            self.fusion_stack = _GcnStack(self.node_stack.out_dim + self.pseudo_stack.out_dim,
                                          config.fusion_layers, rng, "fusion")
            z_dim = self.fusion_stack.out_dim
        self._build_tail(z_dim)

    def encode(self, batch: GraphBatch) -> Tensor:
        x = self.node_stack(Tensor(batch.nodes), batch.prop)
        if self.config.duration_aware:
            xp = self.pseudo_stack(Tensor(batch.pseudo), batch.prop)
            x = self.fusion_stack(concat([x, xp], axis=1), batch.prop)
        return segment_pool(x, batch.ranges, self.config.pooling)

    def forward(self, batch: GraphBatch) -> Tensor:
        return self._finish(self.encode(batch), batch.case_vec)

    def parameters(self):
        params = self.node_stack.parameters()
        if self.pseudo_stack is not None:
            params += self.pseudo_stack.parameters() + self.fusion_stack.parameters()
        return params + self._tail_parameters()

    def train_mode(self, training):
        self.node_stack.train_mode(training)
        if self.pseudo_stack is not None:
            self.pseudo_stack.train_mode(training)
            self.fusion_stack.train_mode(training)
        self._tail_train_mode(training)


class SequenceNet(_NetBase):
    def __init__(self, config, dims, seed):
        super().__init__(config, dims, seed)
        rng = self.rng
        self.node_stack = _LstmStack(dims.node_dim, config.node_layers, rng, "node")
        self.pseudo_stack = None
        self.fusion_stack = None
        z_dim = self.node_stack.out_dim
        if config.duration_aware:
            self.pseudo_stack = _LstmStack(dims.pseudo_dim, config.pseudo_layers, rng, "pseudo")
            self.fusion_stack = _LstmStack(self.node_stack.out_dim + self.pseudo_stack.out_dim,
                                           config.fusion_layers, rng, "fusion")
            z_dim = self.fusion_stack.out_dim
        self._build_tail(z_dim)

    def encode(self, batch: SequenceBatch) -> Tensor:
        T = batch.seq.shape[1]
        steps = [Tensor(batch.seq[:, t, :]) for t in range(T)]
        node_steps, node_final = self.node_stack(steps, batch.mask)
        if not self.config.duration_aware:
            return node_final
        p_steps = [Tensor(batch.pseudo[:, t, :]) for t in range(T)]
        p_out, _ = self.pseudo_stack(p_steps, batch.mask)
        fused_steps = [concat([a, b], axis=1) for a, b in zip(node_steps, p_out)]
        _, z = self.fusion_stack(fused_steps, batch.mask)
        return z

    def forward(self, batch: SequenceBatch) -> Tensor:
        return self._finish(self.encode(batch), batch.case_vec)

    def parameters(self):
        params = self.node_stack.parameters()
        if self.pseudo_stack is not None:
            params += self.pseudo_stack.parameters() + self.fusion_stack.parameters()
        return params + self._tail_parameters()

    def train_mode(self, training):
        self.node_stack.train_mode(training)
        if self.pseudo_stack is not None:
            self.pseudo_stack.train_mode(training)
            self.fusion_stack.train_mode(training)
        self._tail_train_mode(training)


def build_model(config: ModelConfig, dims: InputDims, seed: int = 0):
    if config.duration_aware and dims.pseudo_dim == 0:
        raise ConfigError("duration-aware model requires a pseudo channel in the data")
    net_cls = GraphNet if config.family == "gcn" else SequenceNet
    return net_cls(config, dims, seed)


def parameter_count(net) -> int:
    return int(sum(p.data.size for p in net.parameters()))


# -- training ----------------------------------------------------------------


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_objective: float
    epochs_run: int
    stopped_early: bool
    pruned: bool = False


def predict_logits(net, reps: list, batch_size: int = 512) -> np.ndarray:
    net.train_mode(False)
    outputs = []
    for start in range(0, len(reps), batch_size):
        batch = collate(reps[start:start + batch_size], net.config.duration_aware)
        outputs.append(net.forward(batch).data)
    return np.concatenate(outputs)


def train_model(net, train_reps: list, val_reps: list, *, epochs: int,
                objective: str = "accuracy", patience: int | None = None,
                seed: int = 0, target_objective: float | None = None,
                pruner=None) -> TrainResult:
    """Mini-batch training with per-epoch validation.

    Records loss, objective, and lr per epoch; keeps the best-epoch
    parameters and restores them at the end. Stops early when the objective
    has not improved for `patience` epochs, when `target_objective` is
    reached, or when `pruner(epoch, objective)` returns True (the trial is
    then flagged as pruned). Non-finite loss aborts with diagnostics.
    """
    config = net.config
    loss_fn = make_loss(config.loss)
    objective_fn = resolve_objective(objective)
    params = net.parameters()
    optimizer = make_optimizer(params, config.optim)
    scheduler = make_scheduler(config.optim)
    shuffle_rng = np.random.default_rng(seed)

    val_y = np.array([r.outcome_index for r in val_reps])
    history: list[dict] = []
    best_objective = -np.inf
    best_epoch = -1
    best_state = None
    stopped_early = False
    pruned = False
    last_metric = None

    indices = np.arange(len(train_reps))
    for epoch in range(epochs):
        if scheduler.needs_metric and epoch == 0:
            lr = config.optim.learning_rate
        else:
            lr = scheduler.lr_at(epoch, last_metric) if scheduler.needs_metric else scheduler.lr_at(epoch)
        optimizer.lr = lr

        net.train_mode(True)
        shuffle_rng.shuffle(indices)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(indices), config.batch_size):
            chosen = indices[start:start + config.batch_size]
            batch = collate([train_reps[i] for i in chosen], config.duration_aware)
            try:
                logits = net.forward(batch)
                loss = loss_fn(logits, batch.y)
            except NumericError as exc:
                raise TrainingDiverged(str(exc), epoch=epoch, batch=n_batches, lr=lr) from exc
            if not np.isfinite(loss.data):
                raise TrainingDiverged("loss is not finite", epoch=epoch, batch=n_batches, lr=lr)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.data)
            n_batches += 1

        val_pred = predict_logits(net, val_reps).argmax(axis=1)
        objective_value = float(objective_fn(val_y, val_pred))
        last_metric = objective_value
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / max(1, n_batches),
            "objective": objective_value,
            "lr": lr,
        })

        if objective_value > best_objective:
            best_objective = objective_value
            best_epoch = epoch
            best_state = (
                {p.name: p.data.copy() for p in params},
                [(bn.running_mean.copy(), bn.running_var.copy()) for bn in net.batch_norms()],
            )

        if pruner is not None and pruner(epoch, objective_value):
            pruned = True
            break
        if target_objective is not None and objective_value >= target_objective:
            stopped_early = True
            break
        if patience is not None and epoch - best_epoch >= patience:
            stopped_early = True
            break

    if best_state is not None:
        best_params, best_bn = best_state
        for p in params:
            p.data[...] = best_params[p.name]
        for bn, (mean, var) in zip(net.batch_norms(), best_bn):
            bn.running_mean[...] = mean
            bn.running_var[...] = var
    return TrainResult(
        history=history,
        best_epoch=best_epoch,
        best_objective=float(best_objective),
        epochs_run=len(history),
        stopped_early=stopped_early,
        pruned=pruned,
    )


# -- persistence ---------------------------------------------------------------


def state_dict(net) -> dict[str, np.ndarray]:
    return {p.name: p.data for p in net.parameters()}


def save_checkpoint(path, net, extra: dict | None = None) -> None:
    """JSON + base64 container: config, parameter shapes/dtypes/bytes."""
    payload = {
        "format": "ppmlab-checkpoint/1",
        "config": net.config.to_dict(),
        "dims": {
            "node_dim": net.dims.node_dim, "pseudo_dim": net.dims.pseudo_dim,
            "case_dim": net.dims.case_dim, "n_classes": net.dims.n_classes,
        },
        "params": {
            name: _encode_array(arr) for name, arr in sorted(state_dict(net).items())
        },
        "bn_stats": [
            {"mean": _encode_array(bn.running_mean), "var": _encode_array(bn.running_var)}
            for bn in net.batch_norms()
        ],
        "extra": extra or {},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "dtype": str(arr.dtype),
        "data": base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(entry["data"]), dtype=entry["dtype"]).reshape(entry["shape"])


def load_checkpoint(path):
    """Rebuild a net from a checkpoint file."""
    with open(path) as fh:
        payload = json.load(fh)
    config = ModelConfig.from_dict(payload["config"])
    dims = InputDims(**payload["dims"])
    net = build_model(config, dims, seed=0)
    by_name = {p.name: p for p in net.parameters()}
    for name, entry in payload["params"].items():
        by_name[name].data[...] = _decode_array(entry)
    for bn, entry in zip(net.batch_norms(), payload.get("bn_stats", [])):
        bn.running_mean[...] = _decode_array(entry["mean"])
        bn.running_var[...] = _decode_array(entry["var"])
    return net, payload.get("extra", {})


# -- sklearn-style wrapper ------------------------------------------------------


class OutcomeClassifier(BaseEstimator, ClassifierMixin):
    """fit/predict wrapper around the nets, for pipeline composition.

    X is a list of CaseGraph or CaseSequence; labels default to the
    representations' outcome indices. Pass ``val`` to fit for a held-out
    validation list (otherwise a tail slice of X is used).
    """

    def __init__(self, config: ModelConfig | dict | None = None, max_epochs: int = 300,
                 patience: int | None = None, objective: str = "accuracy",
                 seed: int = 0, target_objective: float | None = None,
                 n_classes: int | None = None):
        self.config = config
        self.max_epochs = max_epochs
        self.patience = patience
        self.objective = objective
        self.seed = seed
        self.target_objective = target_objective
        self.n_classes = n_classes

    def _config(self) -> ModelConfig:
        if self.config is None:
            raise ConfigError("OutcomeClassifier requires a config")
        if isinstance(self.config, ModelConfig):
            return self.config
        return ModelConfig.from_dict(self.config)

    def fit(self, X, y=None, val=None):
        reps = list(X)
        if not reps:
            raise ConfigError("cannot fit on an empty dataset")
        if y is not None and list(y) != [r.outcome_index for r in reps]:
            raise ContractError(
                "labels live in the representations; y, when given, must match their outcome indices")
        if val is None:
            split = max(1, int(0.8 * len(reps)))
            reps, val = reps[:split], reps[split:] or reps[:1]
        config = self._config()
        dims = infer_dims(reps + list(val), self.n_classes)
        self.net_ = build_model(config, dims, seed=self.seed)
        self.result_ = train_model(
            self.net_, reps, list(val),
            epochs=self.max_epochs, objective=self.objective,
            patience=self.patience, seed=self.seed,
            target_objective=self.target_objective,
        )
        self.history_ = self.result_.history
        self.classes_ = np.arange(dims.n_classes)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "net_")
        return predict_logits(self.net_, list(X))

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)
