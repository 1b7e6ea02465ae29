"""Training loss.

The objective sums squared residuals over every feature and time step and
divides by the number of windows in the batch only, so the loss of one
window is the sum (not mean) of its elementwise squared errors. Reported
quality metrics elsewhere use per-element means; this module is just the
optimization target and its gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import InternalError


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    if pred.shape != target.shape:
        raise InternalError(f"loss shape mismatch: {pred.shape} vs {target.shape}")
    if pred.shape[0] == 0:
        raise InternalError("loss over an empty batch")
    diff = pred - target
    return float(np.sum(diff * diff) / pred.shape[0])


def mse_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    if pred.shape != target.shape:
        raise InternalError(f"loss shape mismatch: {pred.shape} vs {target.shape}")
    if pred.shape[0] == 0:
        raise InternalError("loss over an empty batch")
    return 2.0 * (pred - target) / pred.shape[0]
