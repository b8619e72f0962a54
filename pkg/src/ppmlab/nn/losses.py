"""Classification losses over batched logits."""
from __future__ import annotations

import numpy as np

from ..errors import NumericError, ValidityError
from .tensor import Tensor


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of the target class."""
    _check(logits, targets)
    picked = logits.log_softmax().take_per_row(targets)
    return -picked.mean()


def multi_margin(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean multiclass hinge: (1/K) sum_{j != t} max(0, 1 - z_t + z_j).

    The j = t term inside the full sum is the constant 1 (its z terms
    cancel), so summing over all classes and subtracting 1 gives the same
    value and gradient as skipping it.
    """
    _check(logits, targets)
    k = logits.shape[1]
    target_logit = logits.take_per_row(targets).reshape(-1, 1)
    margins = (1.0 - target_logit + logits).relu()
    per_row = (margins.sum(axis=1) - 1.0) / k
    return per_row.mean()


def make_loss(kind: str):
    if kind == "cross_entropy":
        return cross_entropy
    if kind == "multi_margin":
        return multi_margin
    raise ValidityError(f"unknown loss {kind!r}")


def _check(logits: Tensor, targets: np.ndarray) -> None:
    if not np.isfinite(logits.data).all():
        raise NumericError("non-finite logits")
    if np.any(targets < 0) or np.any(targets >= logits.shape[1]):
        raise ValidityError("target class index out of range")
