from .layers import (
    BatchNorm,
    Dense,
    Flatten,
    Layer,
    ReLU,
    Reshape,
    TemporalNorm,
    TemporalNormReverse,
)
from .losses import mse_loss, mse_loss_grad
from .network import Network
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNorm",
    "Dense",
    "Flatten",
    "Layer",
    "Network",
    "ReLU",
    "Reshape",
    "TemporalNorm",
    "TemporalNormReverse",
    "mse_loss",
    "mse_loss_grad",
]
