"""Layer stack with flat parameter naming and state snapshots."""

from __future__ import annotations

import numpy as np

from ..errors import InternalError
from .layers import BatchNorm, Layer


class Network:
    """An ordered stack of layers run as one model.

    Parameters are addressed as ``"<index>:<label>.<name>"`` so optimizers
    and serializers can treat the whole network as a flat dict. Snapshots
    also carry the non-trainable state (batch-norm running stats) so a
    restored network scores identically.
    """

    def __init__(self, layers: list[Layer], arch_text: str, window_steps: int,
                 n_features: int):
        self.layers = layers
        self.arch_text = arch_text
        self.window_steps = window_steps
        self.n_features = n_features
        self._forward_was_training = False

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        out = x
        for layer in self.layers:
            out = layer.forward(out, training=training)
        self._forward_was_training = training
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if not self._forward_was_training:
            raise InternalError("backward requires a preceding training-mode forward pass")
        out = grad
        for layer in reversed(self.layers):
            out = layer.backward(out)
        return out

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"{i}:{layer.label}.{name}"] = p
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, g in layer.grads().items():
                if g is None:
                    raise InternalError(
                        f"gradient for {i}:{layer.label}.{name} not computed")
                out[f"{i}:{layer.label}.{name}"] = g
        return out

    def get_state(self) -> dict[str, np.ndarray]:
        """Copies of all trainable parameters plus running statistics."""
        state = {name: p.copy() for name, p in self.parameters().items()}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm):
                state[f"{i}:{layer.label}.running_mean"] = layer.running_mean.copy()
                state[f"{i}:{layer.label}.running_std"] = layer.running_std.copy()
                state[f"{i}:{layer.label}.updates"] = np.array(layer.updates)
        return state

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        for name, value in state.items():
            if name in params:
                if params[name].shape != value.shape:
                    raise InternalError(
                        f"state shape mismatch for {name}: "
                        f"{params[name].shape} vs {value.shape}")
                params[name][...] = value
            elif name.endswith((".running_mean", ".running_std", ".updates")):
                idx = int(name.split(":", 1)[0])
                layer = self.layers[idx]
                if not isinstance(layer, BatchNorm):
                    raise InternalError(f"state entry {name} targets a non-norm layer")
                if name.endswith(".running_mean"):
                    layer.running_mean = np.array(value, dtype=float).copy()
                elif name.endswith(".running_std"):
                    layer.running_std = np.array(value, dtype=float).copy()
                else:
                    layer.updates = int(value)
            else:
                raise InternalError(f"unknown state entry {name}")
