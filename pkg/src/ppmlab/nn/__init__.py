from .config import LayerConfig, OptimSpec
from .layers import (
    BatchNorm,
    Dense,
    DenseBlock,
    Dropout,
    GCNConv,
    LSTMLayer,
    apply_activation,
    gcn_conv_forward,
    lstm_forward,
    normalized_propagation,
    pool,
)
from .losses import cross_entropy, make_loss, multi_margin
from .optim import Optimizer, Scheduler, make_optimizer, make_scheduler, scheduler_lr
from .tensor import Parameter, Tensor, concat, coo_matmul, segment_pool

__all__ = [
    "LayerConfig", "OptimSpec", "Tensor", "Parameter", "concat", "coo_matmul",
    "segment_pool", "Dense", "DenseBlock", "BatchNorm", "Dropout", "GCNConv",
    "LSTMLayer", "apply_activation", "gcn_conv_forward", "lstm_forward",
    "normalized_propagation", "pool", "cross_entropy", "multi_margin",
    "make_loss", "Optimizer", "Scheduler", "make_optimizer", "make_scheduler",
    "scheduler_lr",
]
