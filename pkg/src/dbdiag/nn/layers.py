"""Layers for the reconstruction network.

Everything is float64 numpy. Each layer caches whatever its backward pass
needs during a ``forward(..., training=True)`` call and exposes trainable
parameters and their gradients as name -> array dicts. Forward passes with
``training=False`` never mutate trainable state (batch-stat layers switch to
their running statistics), so inference is safe to run concurrently on a
shared model.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, InternalError


class Layer:
    """Base layer: parameter-free pass-through."""

    label = "layer"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}


class Dense(Layer):
    """Affine map ``x @ W + b`` on the last axis.

    ``reverse`` and ``is_output`` only tag the layer's role in the
    encoder/decoder mirror; the computation is identical.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 reverse: bool = False, is_output: bool = False):
        if n_in <= 0 or n_out <= 0:
            raise ConfigError(f"dense layer sizes must be positive, got {n_in}x{n_out}")
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.weights = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.bias = np.zeros(n_out)
        self.reverse = reverse
        self.is_output = is_output
        self.label = "dense_out" if is_output else ("dense_reverse" if reverse else "dense")
        self._x = None
        self.d_weights = None
        self.d_bias = None

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ConfigError(
                f"dense layer expects input width {self.n_in}, got shape {x.shape}")
        if training:
            self._x = x
        return x @ self.weights + self.bias

    def backward(self, grad):
        if self._x is None:
            raise InternalError("dense backward called before a training forward pass")
        self.d_weights = self._x.T @ grad
        self.d_bias = grad.sum(axis=0)
        return grad @ self.weights.T

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def grads(self):
        return {"weights": self.d_weights, "bias": self.d_bias}


class ReLU(Layer):
    label = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        if training:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        if self._mask is None:
            raise InternalError("relu backward called before a training forward pass")
        return grad * self._mask


class Flatten(Layer):
    """[batch, T, F] -> [batch, T*F], row-major (time-major) order."""

    label = "flatten"

    def __init__(self, window_steps: int, n_features: int):
        self.window_steps = window_steps
        self.n_features = n_features

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[1:] != (self.window_steps, self.n_features):
            raise ConfigError(
                f"flatten expects [batch, {self.window_steps}, {self.n_features}], "
                f"got {x.shape}")
        return x.reshape(x.shape[0], self.window_steps * self.n_features)

    def backward(self, grad):
        return grad.reshape(grad.shape[0], self.window_steps, self.n_features)


class Reshape(Layer):
    """[batch, T*F] -> [batch, T, F]; inverse of Flatten."""

    label = "reshape"

    def __init__(self, window_steps: int, n_features: int):
        self.window_steps = window_steps
        self.n_features = n_features

    def forward(self, x, training=False):
        width = self.window_steps * self.n_features
        if x.ndim != 2 or x.shape[1] != width:
            raise ConfigError(f"reshape expects width {width}, got shape {x.shape}")
        return x.reshape(x.shape[0], self.window_steps, self.n_features)

    def backward(self, grad):
        return grad.reshape(grad.shape[0], self.window_steps * self.n_features)


def _moment_backward(d_norm, norm, denom, std, d_mean, d_std, count, axes):
    """Input gradient of z-normalization given upstream grad wrt the
    normalized values plus any externally accumulated grads wrt the moments.

    ``denom = std + eps`` divides the centered values, ``count`` is the number
    of elements each (mean, std) pair was computed over, ``axes`` the reduced
    axes. The std path is zero where std == 0 (constant slices normalize to
    an exact constant, so the one-sided derivative drops that term's factor).
    """
    d_mean = d_mean - d_norm.sum(axis=axes, keepdims=True) / denom
    d_std = d_std - (d_norm * norm).sum(axis=axes, keepdims=True) / denom
    safe = np.where(std > 0.0, std, 1.0)
    dstd_dx = np.where(std > 0.0, norm * denom / (count * safe), 0.0)
    return d_norm / denom + d_mean / count + d_std * dstd_dx


class TemporalNorm(Layer):
    """Normalizes each (sample, feature) series along its own time axis.

    Every window leaves the layer with per-feature mean 0 and standard
    deviation ~1 regardless of where in the original series it was cut,
    which is what lets one model handle level shifts and trends. Uses the
    population std plus ``epsilon`` (added to the std, not the variance), so
    constant series map to 0 instead of failing. The per-sample moments are
    kept for the paired denormalizing layer at the decoder end.
    """

    label = "btn"

    def __init__(self, n_features: int, epsilon: float = 1e-5):
        if epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.epsilon = epsilon
        self.last_mean = None   # [batch, 1, F], read by the paired reverse layer
        self.last_std = None
        self._cache = None
        self._ext_d_mean = None  # accumulated by the paired reverse's backward
        self._ext_d_std = None
        self.d_gamma = None
        self.d_beta = None

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[2] != self.gamma.shape[0]:
            raise ConfigError(
                f"temporal norm expects [batch, T, {self.gamma.shape[0]}], got {x.shape}")
        if x.shape[1] < 2:
            raise ConfigError("temporal norm needs at least 2 time steps per window")
        mean = x.mean(axis=1, keepdims=True)
        std = x.std(axis=1, keepdims=True)
        denom = std + self.epsilon
        norm = (x - mean) / denom
        self.last_mean = mean
        self.last_std = std
        if training:
            self._cache = (norm, std, denom, x.shape[1])
            self._ext_d_mean = None
            self._ext_d_std = None
        return self.gamma * norm + self.beta

    def backward(self, grad):
        if self._cache is None:
            raise InternalError("temporal norm backward called before a training forward pass")
        norm, std, denom, steps = self._cache
        self.d_gamma = (grad * norm).sum(axis=(0, 1))
        self.d_beta = grad.sum(axis=(0, 1))
        d_norm = grad * self.gamma
        d_mean = self._ext_d_mean if self._ext_d_mean is not None else 0.0
        d_std = self._ext_d_std if self._ext_d_std is not None else 0.0
        return _moment_backward(d_norm, norm, denom, std, d_mean, d_std, steps, axes=1)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.d_gamma, "beta": self.d_beta}


class TemporalNormReverse(Layer):
    """Decoder end of a temporal-norm pair.

    Applies its own trainable scale/offset, then restores each sample's
    original per-feature level and spread using the moments the paired
    encoder layer saved during the same forward pass. During backward it
    routes the gradients wrt those moments back to the paired layer so
    input gradients stay exact.
    """

    label = "btn_reverse"

    def __init__(self, n_features: int, paired: TemporalNorm):
        self.gamma = np.ones(n_features)
        self.beta = np.zeros(n_features)
        self.paired = paired
        self._cache = None
        self.d_gamma = None
        self.d_beta = None

    def forward(self, x, training=False):
        mean, std = self.paired.last_mean, self.paired.last_std
        if mean is None:
            raise InternalError("paired temporal-norm moments missing; encoder layer "
                                "did not run in this forward pass")
        if x.shape != (mean.shape[0], x.shape[1], mean.shape[2]):
            raise InternalError(
                f"paired moments {mean.shape} do not match activations {x.shape}")
        denom = std + self.paired.epsilon
        scaled = self.gamma * x + self.beta
        if training:
            self._cache = (x, scaled, denom)
        return scaled * denom + mean

    def backward(self, grad):
        if self._cache is None:
            raise InternalError("temporal-norm reverse backward called before a "
                                "training forward pass")
        x, scaled, denom = self._cache
        self.d_gamma = (grad * x * denom).sum(axis=(0, 1))
        self.d_beta = (grad * denom).sum(axis=(0, 1))
        ext_mean = grad.sum(axis=1, keepdims=True)
        ext_std = (grad * scaled).sum(axis=1, keepdims=True)
        if self.paired._ext_d_mean is None:
            self.paired._ext_d_mean = ext_mean
            self.paired._ext_d_std = ext_std
        else:
            self.paired._ext_d_mean = self.paired._ext_d_mean + ext_mean
            self.paired._ext_d_std = self.paired._ext_d_std + ext_std
        return grad * self.gamma * denom

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.d_gamma, "beta": self.d_beta}


class BatchNorm(Layer):
    """Batch normalization over every axis except the last (feature) axis.

    On [batch, T, F] input the moments pool batches and time steps together;
    on flat [batch, D] activations they pool the batch. Training mode uses
    batch statistics and updates running stats with an exponential moving
    average; inference uses the running stats and refuses to run before the
    first training update.
    """

    label = "bn"

    def __init__(self, width: int, epsilon: float = 1e-5, momentum: float = 0.1,
                 reverse: bool = False):
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.epsilon = epsilon
        self.momentum = momentum
        self.running_mean = np.zeros(width)
        self.running_std = np.ones(width)
        self.updates = 0
        self.reverse = reverse
        if reverse:
            self.label = "bn_reverse"
        self._cache = None
        self.d_gamma = None
        self.d_beta = None

    @property
    def width(self) -> int:
        return self.gamma.shape[0]

    def forward(self, x, training=False):
        if x.shape[-1] != self.width:
            raise ConfigError(
                f"batch norm expects feature width {self.width}, got shape {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            std = x.std(axis=axes)
            self.running_mean = (1.0 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_std = (1.0 - self.momentum) * self.running_std + self.momentum * std
            self.updates += 1
            denom = std + self.epsilon
            norm = (x - mean) / denom
            count = x.size // self.width
            self._cache = (norm, std, denom, count, axes)
        else:
            if self.updates == 0:
                raise ConfigError("batch norm has no running statistics yet; "
                                  "train before running inference")
            norm = (x - self.running_mean) / (self.running_std + self.epsilon)
        return self.gamma * norm + self.beta

    def backward(self, grad):
        if self._cache is None:
            raise InternalError("batch norm backward called before a training forward pass")
        norm, std, denom, count, axes = self._cache
        self.d_gamma = (grad * norm).sum(axis=axes)
        self.d_beta = grad.sum(axis=axes)
        d_norm = grad * self.gamma
        return _moment_backward(d_norm, norm, denom, std, 0.0, 0.0, count, axes=axes)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.d_gamma, "beta": self.d_beta}
