"""Layers: dense, edge-weighted graph convolution, LSTM, batch norm, dropout.

The graph convolution follows the symmetric-normalized propagation rule
with self-loops: out = act(D^{-1/2} (A_w + I) D^{-1/2} X W). Stored edges
are treated as undirected for propagation (each edge contributes in both
directions); the self-loop weight is 1 in raw weight units. Because edge
weights are data, the normalized operator is constant per batch and can be
precomputed once.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, ValidityError
from .config import LayerConfig
from .tensor import Parameter, Tensor, coo_matmul, segment_pool


def apply_activation(x: Tensor, name: str) -> Tensor:
    if name == "relu":
        return x.relu()
    if name == "leaky_relu":
        return x.leaky_relu()
    if name == "elu":
        return x.elu()
    if name == "tanh":
        return x.tanh()
    if name == "softplus":
        return x.softplus()
    if name == "gelu":
        return x.gelu()
    if name == "identity":
        return x
    raise ValidityError(f"unknown activation {name!r}")


def normalized_propagation(edge_index: np.ndarray, edge_weight: np.ndarray, n_nodes: int,
                           add_self_loops: bool = True):
    """COO triplets of the symmetric-normalized weighted adjacency.

    Returns (rows, cols, vals) including both edge directions and unit
    self-loops. Raises when a node would have zero degree.
    """
    if np.any(edge_weight < 0):
        raise ValidityError("edge weights must be non-negative")
    deg = np.zeros(n_nodes)
    if add_self_loops:
        deg += 1.0
    src, dst = (edge_index[0], edge_index[1]) if edge_index.size else (np.zeros(0, int), np.zeros(0, int))
    np.add.at(deg, src, edge_weight)
    np.add.at(deg, dst, edge_weight)
    if np.any(deg == 0):
        raise ValidityError("zero-degree node; enable self-loops or connect the node")
    inv_sqrt = 1.0 / np.sqrt(deg)

    rows = [dst, src]
    cols = [src, dst]
    vals = [edge_weight * inv_sqrt[src] * inv_sqrt[dst]] * 2
    if add_self_loops:
        loops = np.arange(n_nodes)
        rows.append(loops)
        cols.append(loops)
        vals.append(1.0 / deg)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def gcn_conv_forward(v: Tensor, edge_index: np.ndarray, edge_weight: np.ndarray,
                     w: Tensor, activation: str = "identity", add_self_loops: bool = True) -> Tensor:
    """One graph convolution on a single graph, by sparse message passing."""
    rows, cols, vals = normalized_propagation(edge_index, edge_weight, v.shape[0], add_self_loops)
    return apply_activation(coo_matmul(rows, cols, vals, v.shape[0], v @ w), activation)


class Module:
    def parameters(self) -> list[Parameter]:
        return []

    def batch_norms(self) -> list["BatchNorm"]:
        return []

    def train_mode(self, training: bool) -> None:
        pass


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 name: str, l2: float = 0.0, bias: bool = True):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.w = Parameter(rng.uniform(-limit, limit, size=(in_dim, out_dim)), name=f"{name}.w", l2=l2)
        self.b = Parameter(np.zeros(out_dim), name=f"{name}.b", l2=l2) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.w
        if self.b is not None:
            out = out + self.b
        return out

    def parameters(self):
        return [self.w] + ([self.b] if self.b is not None else [])


class BatchNorm(Module):
    """1-D batch normalization over the first axis.

    Train mode normalizes by batch statistics and updates running stats with
    the configured momentum; eval mode is a fixed affine map using the
    running statistics.
    """

    def __init__(self, dim: int, momentum: float, eps: float, name: str):
        self.gamma = Parameter(np.ones(dim), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(dim), name=f"{name}.beta")
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        if self.training:
            mu = x.mean(axis=0, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=0, keepdims=True)
            inv = (var + self.eps) ** -0.5
            out = centered * inv * self.gamma + self.beta
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu.data.ravel()
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var.data.ravel()
            return out
        scale = self.gamma.data / np.sqrt(self.running_var + self.eps)
        shift = self.beta.data - self.running_mean * scale
        return x * Tensor(scale) + Tensor(shift)

    def parameters(self):
        return [self.gamma, self.beta]

    def train_mode(self, training):
        self.training = training


class Dropout(Module):
    """Inverted dropout: scales kept units by 1/(1-p) so eval is identity."""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValidityError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.rng = rng
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.rate == 0.0:
            return x
        keep = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * Tensor(keep)

    def train_mode(self, training):
        self.training = training


class GCNConv(Module):
    """Graph-convolution layer: propagation + linear map + extras.

    Pipeline: conv -> optional batch norm -> activation -> optional dropout
    -> optional skip connection (identity when shapes match, otherwise a
    learned projection of the layer input).
    """

    def __init__(self, in_dim: int, out_dim: int, config: LayerConfig,
                 rng: np.random.Generator, name: str):
        self.config = config
        self.lin = Dense(in_dim, out_dim, rng, name=f"{name}.lin", l2=config.l2_coeff)
        self.bn = BatchNorm(out_dim, config.bn_momentum, config.bn_eps, f"{name}.bn") if config.batch_norm else None
        self.dropout = Dropout(config.dropout_rate, rng) if config.dropout_rate > 0 else None
        self.skip_proj = None
        if config.skip_connection and in_dim != out_dim:
            self.skip_proj = Dense(in_dim, out_dim, rng, name=f"{name}.skip", bias=False)

    def __call__(self, x: Tensor, prop: tuple) -> Tensor:
        rows, cols, vals, n = prop
        out = coo_matmul(rows, cols, vals, n, self.lin(x))
        if self.bn is not None:
            out = self.bn(out)
        out = apply_activation(out, self.config.activation)
        if self.dropout is not None:
            out = self.dropout(out)
        if self.config.skip_connection:
            out = out + (self.skip_proj(x) if self.skip_proj is not None else x)
        return out

    def parameters(self):
        params = self.lin.parameters()
        if self.bn is not None:
            params += self.bn.parameters()
        if self.skip_proj is not None:
            params += self.skip_proj.parameters()
        return params

    def batch_norms(self):
        return [self.bn] if self.bn is not None else []

    def train_mode(self, training):
        for m in (self.bn, self.dropout):
            if m is not None:
                m.train_mode(training)


class LSTMLayer(Module):
    """One LSTM layer over a batch of masked step tensors.

    Gate order in the packed weight matrices is (input, forget, cell,
    output). Masked steps pass hidden and cell state through unchanged, so
    the final state equals the state at the last unmasked step. Optional
    batch norm is shared across steps and applied to the hidden output;
    dropout redraw its mask at every step.
    """

    def __init__(self, in_dim: int, units: int, config: LayerConfig,
                 rng: np.random.Generator, name: str):
        self.units = units
        self.config = config
        k = 1.0 / np.sqrt(units)
        self.w_ih = Parameter(rng.uniform(-k, k, size=(in_dim, 4 * units)), name=f"{name}.w_ih", l2=config.l2_coeff)
        self.w_hh = Parameter(rng.uniform(-k, k, size=(units, 4 * units)), name=f"{name}.w_hh", l2=config.l2_coeff)
        self.bias = Parameter(np.zeros(4 * units), name=f"{name}.bias", l2=config.l2_coeff)
        self.bn = BatchNorm(units, config.bn_momentum, config.bn_eps, f"{name}.bn") if config.batch_norm else None
        self.dropout = Dropout(config.dropout_rate, rng) if config.dropout_rate > 0 else None

    def _cell(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        gates = x @ self.w_ih + h @ self.w_hh + self.bias
        u = self.units
        i = gates.narrow(1, 0, u).sigmoid()
        f = gates.narrow(1, u, u).sigmoid()
        g = gates.narrow(1, 2 * u, u).tanh()
        o = gates.narrow(1, 3 * u, u).sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new

    def __call__(self, steps: list[Tensor], mask: np.ndarray) -> tuple[list[Tensor], Tensor]:
        """Run the recurrence; returns (per-step outputs, final hidden state)."""
        if not mask.any(axis=1).all():
            raise ValidityError("all-masked sequence in batch")
        batch = steps[0].shape[0]
        h = Tensor(np.zeros((batch, self.units)))
        c = Tensor(np.zeros((batch, self.units)))
        outputs = []
        for t, x_t in enumerate(steps):
            h_new, c_new = self._cell(x_t, h, c)
            m = Tensor(mask[:, t:t + 1].astype(float))
            h = h_new * m + h * (1.0 - m)
            c = c_new * m + c * (1.0 - m)
            out = h
            if self.bn is not None:
                out = self.bn(out)
            if self.dropout is not None:
                out = self.dropout(out)
            outputs.append(out)
        return outputs, h

    def parameters(self):
        params = [self.w_ih, self.w_hh, self.bias]
        if self.bn is not None:
            params += self.bn.parameters()
        return params

    def batch_norms(self):
        return [self.bn] if self.bn is not None else []

    def train_mode(self, training):
        for m in (self.bn, self.dropout):
            if m is not None:
                m.train_mode(training)


class DenseBlock(Module):
    """Dense layer + optional batch norm, activation, dropout."""

    def __init__(self, in_dim: int, config: LayerConfig, rng: np.random.Generator, name: str):
        self.config = config
        self.lin = Dense(in_dim, config.units, rng, name=name, l2=config.l2_coeff)
        self.bn = BatchNorm(config.units, config.bn_momentum, config.bn_eps, f"{name}.bn") if config.batch_norm else None
        self.dropout = Dropout(config.dropout_rate, rng) if config.dropout_rate > 0 else None

    def __call__(self, x: Tensor) -> Tensor:
        out = self.lin(x)
        if self.bn is not None:
            out = self.bn(out)
        out = apply_activation(out, self.config.activation)
        if self.dropout is not None:
            out = self.dropout(out)
        return out

    def parameters(self):
        params = self.lin.parameters()
        if self.bn is not None:
            params += self.bn.parameters()
        return params

    def batch_norms(self):
        return [self.bn] if self.bn is not None else []

    def train_mode(self, training):
        for m in (self.bn, self.dropout):
            if m is not None:
                m.train_mode(training)


def pool(node_states: Tensor, method: str) -> Tensor:
    """Aggregate all rows of a single graph's node states into one vector."""
    n = node_states.shape[0]
    if n < 1:
        raise ValidityError("cannot pool zero nodes")
    return segment_pool(node_states, [(0, n)], method).reshape(-1)


def lstm_forward(seq: np.ndarray, mask: np.ndarray, layer: LSTMLayer) -> tuple[list[Tensor], Tensor]:
    """Single-sequence LSTM convenience wrapper: seq is (T, d), mask (T,)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValidityError("all-masked sequence")
    holes = np.where(~mask[:-1] & mask[1:])[0]
    if holes.size:
        raise ContractError("mask must be prefix-true (no holes)")
    steps = [Tensor(seq[t:t + 1]) for t in range(seq.shape[0])]
    return layer(steps, mask.reshape(1, -1))
