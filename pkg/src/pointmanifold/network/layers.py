"""Layer primitives with hand-written reverse-mode gradients.

Every layer keeps the tensors it needs from the last ``forward`` call and
``backward(grad_out)`` returns the gradient with respect to the input while
accumulating parameter gradients into ``Parameter.grad``. One forward must be
followed by at most one backward; layers are not re-entrant.
"""

from __future__ import annotations

import numpy as np

from .._kernels import bn_backward, bn_forward
from ..errors import ContractError, InvalidStateError

LEAKY_SLOPE = 0.2


class Parameter:
    """A learnable tensor and its same-shape gradient buffer."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter(shape={self.value.shape}, dtype={self.value.dtype})"


def glorot_uniform(rng, fan_out, fan_in, dtype=np.float64, fan_in_scale=None):
    """Uniform in +-sqrt(6 / (fan_in + fan_out)); ``fan_in_scale`` overrides fan_in in the bound."""
    bound = np.sqrt(6.0 / ((fan_in_scale or fan_in) + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)


class Layer:
    """Base class: parameters, buffers and recursive traversal."""

    name = "layer"

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + key, value
            elif isinstance(value, Layer):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Layer):
                for i, sub in enumerate(value):
                    yield from sub.named_parameters(f"{prefix}{key}.{i}.")

    def named_buffers(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Layer):
                yield from value.named_buffers(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Layer):
                for i, sub in enumerate(value):
                    yield from sub.named_buffers(f"{prefix}{key}.{i}.")
        yield from self._own_buffers(prefix)

    def _own_buffers(self, prefix):
        return iter(())

    def sublayers(self):
        """This layer and every layer nested in it, depth first."""
        yield self
        for value in vars(self).values():
            if isinstance(value, Layer):
                yield from value.sublayers()
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Layer):
                for sub in value:
                    yield from sub.sublayers()

    def set_track_margins(self, flag):
        """Record distances to non-differentiable points on every forward (for gradient checks)."""
        for layer in self.sublayers():
            if hasattr(layer, "track_margins"):
                layer.track_margins = bool(flag)

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _check_width(self, x, expected):
        if x.shape[-1] != expected:
            raise ContractError(
                f"{self.name}: expected input width {expected}, got shape {x.shape}"
            )


class Linear(Layer):
    """``y = x W^T + b`` applied over the last axis."""

    def __init__(self, in_features, out_features, bias=True, rng=None, dtype=np.float64, name="linear"):
        rng = np.random.default_rng(rng)
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(glorot_uniform(rng, out_features, in_features, dtype))
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None
        self._x = None

    def forward(self, x):
        self._check_width(x, self.in_features)
        self._x = x
        y = x @ self.weight.value.T
        if self.bias is not None:
            y = y + self.bias.value
        return y

    def backward(self, grad):
        x2 = self._x.reshape(-1, self.in_features)
        g2 = grad.reshape(-1, self.out_features)
        self.weight.grad += g2.T @ x2
        if self.bias is not None:
            self.bias.grad += g2.sum(axis=0)
        return grad @ self.weight.value


def leaky_relu(x, alpha=LEAKY_SLOPE):
    return np.where(x > 0, x, alpha * x)


class LeakyReLU(Layer):
    def __init__(self, alpha=LEAKY_SLOPE, name="leaky_relu"):
        self.alpha = alpha
        self.name = name
        self._positive = None
        # smallest |input| of the last forward, filled only when track_margins is set
        self.track_margins = False
        self.kink_margin = np.inf

    def forward(self, x):
        self._positive = x > 0
        if self.track_margins:
            self.kink_margin = float(np.abs(x).min()) if x.size else np.inf
        return np.where(self._positive, x, self.alpha * x)

    def backward(self, grad):
        return np.where(self._positive, grad, self.alpha * grad)

    def pattern(self):
        return self._positive


class BatchNorm(Layer):
    """Per-channel normalization over every axis but the last.

    Training mode uses batch statistics and updates exponential running
    averages (unbiased variance); eval mode uses the running averages.
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float64, name="batchnorm"):
        self.name = name
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.scale = Parameter(np.ones(channels, dtype=dtype))
        self.shift = Parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def _own_buffers(self, prefix):
        yield prefix + "running_mean", self.running_mean
        yield prefix + "running_var", self.running_var

    def forward(self, x, train=False):
        self._check_width(x, self.channels)
        shape = x.shape
        x2 = np.ascontiguousarray(x.reshape(-1, self.channels))
        count = x2.shape[0]
        if train and count < 2:
            raise InvalidStateError(f"{self.name}: training mode needs at least 2 values per channel")
        out, xhat, mean, var, inv_std = bn_forward(
            x2, self.running_mean.astype(np.float64), self.running_var.astype(np.float64),
            self.scale.value, self.shift.value, self.eps, train,
        )
        if train:
            m = self.momentum
            self.running_mean *= 1.0 - m
            self.running_mean += m * mean
            self.running_var *= 1.0 - m
            self.running_var += m * var * (count / (count - 1))
        self._cache = (xhat, inv_std, train, shape)
        return out.reshape(shape)

    def backward(self, grad):
        xhat, inv_std, train, shape = self._cache
        g2 = np.ascontiguousarray(grad.reshape(-1, self.channels))
        gx, g_scale, g_shift = bn_backward(g2, xhat, self.scale.value, inv_std, train)
        self.scale.grad += g_scale
        self.shift.grad += g_shift
        return gx.reshape(shape)


class Dropout(Layer):
    """Inverted dropout; identity in eval mode or at rate 0."""

    def __init__(self, rate=0.5, name="dropout"):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.name = name
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise InvalidStateError(f"{self.name}: training mode needs a random generator")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class GlobalMaxPool(Layer):
    """Max over the point axis of a ``(B, n, c)`` tensor.

    The gradient goes to the first index attaining the maximum.
    """

    name = "global_max_pool"

    def __init__(self):
        self._arg = None
        self._shape = None
        # gap between the two largest values, filled only when track_margins is set
        self.track_margins = False
        self.tie_margin = np.inf

    def forward(self, x):
        if x.ndim != 3:
            raise ContractError(f"{self.name}: expected (B, n, c), got shape {x.shape}")
        self._arg = np.argmax(x, axis=1)
        self._shape = x.shape
        if self.track_margins and x.shape[1] > 1:
            top2 = -np.partition(-x, 1, axis=1)[:, :2]
            self.tie_margin = float((top2[:, 0] - top2[:, 1]).min())
        return np.take_along_axis(x, self._arg[:, None, :], axis=1)[:, 0, :]

    def pattern(self):
        return self._arg

    def backward(self, grad):
        out = np.zeros(self._shape, dtype=grad.dtype)
        np.put_along_axis(out, self._arg[:, None, :], grad[:, None, :], axis=1)
        return out


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns ``(loss, grad_logits)``.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ContractError(
            f"softmax_cross_entropy: logits {logits.shape} and labels {labels.shape} disagree"
        )
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = softmax(logits)
    grad[rows, labels] -= 1.0
    return loss, grad / len(labels)
