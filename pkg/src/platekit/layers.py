"""Trainable layers with explicit forward/backward passes.

Feature maps are (B, H, W, C) float64. Convolutions carry no bias (the
batch-norm that follows them supplies the affine shift); linear layers
do carry one. Backward passes accumulate into ``Param.grad``, so call
``zero_grad`` between steps.
"""

import numpy as np

from . import kernels
from .errors import DegenerateBatchError, ShapeError
from .tensor import pad_hw, sigmoid, unpad_hw


class Param:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)


class Layer:
    def parameters(self) -> list:
        return []

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad[...] = 0.0

    def forward(self, x, train: bool = True):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


def _init_weight(rng, shape, fan_in: int, init_std):
    """Default: uniform in +-1/sqrt(fan-in); an explicit init_std selects
    a zero-mean normal instead (the convention the image-translation
    networks use)."""
    rng = rng or np.random.default_rng(0)
    if init_std is None:
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, shape)
    return rng.normal(0.0, init_std, shape)


def _out_size(size: int, f: int, s: int, p: int) -> int:
    o = (size + 2 * p - f) // s + 1
    if o < 1:
        raise ShapeError(f"window {f} stride {s} pad {p} does not fit extent {size}")
    return o


class Conv2D(Layer):
    def __init__(self, fh, fw, in_ch, out_ch, stride=(1, 1), pad=(0, 0),
                 rng=None, init_std=None):
        self.fh, self.fw = fh, fw
        self.in_ch, self.out_ch = in_ch, out_ch
        self.sh, self.sw = stride
        self.ph, self.pw = pad
        self.k = Param("kernel", _init_weight(rng, (fh, fw, in_ch, out_ch),
                                              fh * fw * in_ch, init_std))
        self._xp = None

    def parameters(self):
        return [self.k]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise ShapeError(f"expected (B,H,W,{self.in_ch}), got {x.shape}")
        _out_size(x.shape[1], self.fh, self.sh, self.ph)
        _out_size(x.shape[2], self.fw, self.sw, self.pw)
        xp = pad_hw(x, self.ph, self.pw)
        self._xp = xp
        return kernels.conv2d_fwd(xp, self.k.value, self.sh, self.sw)

    def backward(self, dout):
        xp = self._xp
        self.k.grad += kernels.conv2d_bwd_kernel(xp, dout, self.sh, self.sw,
                                                 self.fh, self.fw)
        dxp = kernels.conv2d_bwd_input(dout, self.k.value, self.sh, self.sw,
                                       xp.shape[1], xp.shape[2])
        return unpad_hw(dxp, self.ph, self.pw)


class DepthwiseConv2D(Layer):
    """One filter per input channel; no cross-channel mixing."""

    def __init__(self, fh, fw, ch, stride=(1, 1), pad=(0, 0), rng=None, init_std=None):
        self.fh, self.fw = fh, fw
        self.ch = ch
        self.sh, self.sw = stride
        self.ph, self.pw = pad
        self.k = Param("kernel", _init_weight(rng, (fh, fw, ch), fh * fw, init_std))
        self._xp = None

    def parameters(self):
        return [self.k]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[3] != self.ch:
            raise ShapeError(f"expected (B,H,W,{self.ch}), got {x.shape}")
        _out_size(x.shape[1], self.fh, self.sh, self.ph)
        _out_size(x.shape[2], self.fw, self.sw, self.pw)
        xp = pad_hw(x, self.ph, self.pw)
        self._xp = xp
        return kernels.depthwise_fwd(xp, self.k.value, self.sh, self.sw)

    def backward(self, dout):
        xp = self._xp
        self.k.grad += kernels.depthwise_bwd_kernel(xp, dout, self.sh, self.sw,
                                                    self.fh, self.fw)
        dxp = kernels.depthwise_bwd_input(dout, self.k.value, self.sh, self.sw,
                                          xp.shape[1], xp.shape[2])
        return unpad_hw(dxp, self.ph, self.pw)


class PointwiseConv2D(Layer):
    """1x1 convolution: a per-pixel channel mix, done as one matmul."""

    def __init__(self, in_ch, out_ch, rng=None, init_std=None):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.k = Param("kernel", _init_weight(rng, (in_ch, out_ch), in_ch, init_std))
        self._x = None

    def parameters(self):
        return [self.k]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise ShapeError(f"expected (B,H,W,{self.in_ch}), got {x.shape}")
        self._x = x
        return x @ self.k.value

    def backward(self, dout):
        x = self._x
        self.k.grad += np.tensordot(x, dout, axes=([0, 1, 2], [0, 1, 2]))
        return dout @ self.k.value.T


class BatchNorm2D(Layer):
    """Per-channel normalization over the (batch, height, width) axes."""

    def __init__(self, ch, eps=1e-5, momentum=0.9):
        self.ch = ch
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param("gamma", np.ones(ch))
        self.beta = Param("beta", np.zeros(ch))
        self.running_mean = np.zeros(ch)
        self.running_var = np.ones(ch)
        self._cache = None

    def parameters(self):
        return [self.gamma, self.beta]

    def forward(self, x, train=True):
        if x.ndim != 4 or x.shape[3] != self.ch:
            raise ShapeError(f"expected (B,H,W,{self.ch}), got {x.shape}")
        if train:
            n = x.shape[0] * x.shape[1] * x.shape[2]
            if n < 2:
                raise DegenerateBatchError(
                    "batch statistics need at least 2 samples per channel")
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mean
            self.running_var = m * self.running_var + (1 - m) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, train, x.shape)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, dout):
        xhat, inv, train, shape = self._cache
        self.gamma.grad += np.sum(dout * xhat, axis=(0, 1, 2))
        self.beta.grad += np.sum(dout, axis=(0, 1, 2))
        dxhat = dout * self.gamma.value
        if not train:
            return dxhat * inv
        n = shape[0] * shape[1] * shape[2]
        s1 = np.sum(dxhat, axis=(0, 1, 2))
        s2 = np.sum(dxhat * xhat, axis=(0, 1, 2))
        return (inv / n) * (n * dxhat - s1 - xhat * s2)


class ReLU(Layer):
    def forward(self, x, train=True):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class LeakyReLU(Layer):
    def __init__(self, slope=0.2):
        self.slope = slope

    def forward(self, x, train=True):
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, dout):
        return np.where(self._mask, dout, self.slope * dout)


class Sigmoid(Layer):
    def forward(self, x, train=True):
        self._out = sigmoid(x)
        return self._out

    def backward(self, dout):
        return dout * self._out * (1.0 - self._out)


class Tanh(Layer):
    def forward(self, x, train=True):
        self._out = np.tanh(x)
        return self._out

    def backward(self, dout):
        return dout * (1.0 - self._out ** 2)


class MaxPool2D(Layer):
    """Padding (with -inf, so it never wins a window) is allowed to be
    asymmetric in h and w, matching the column-preserving pools of the
    recognizer stack."""

    def __init__(self, window=(2, 2), stride=(2, 2), pad=(0, 0)):
        self.wh, self.ww = window
        self.sh, self.sw = stride
        self.ph, self.pw = pad
        if self.ph >= self.wh or self.pw >= self.ww:
            raise ShapeError("padding must be smaller than the pool window")
        self._cache = None

    def forward(self, x, train=True):
        if x.ndim != 4:
            raise ShapeError(f"expected a 4-d feature map, got {x.shape}")
        _out_size(x.shape[1], self.wh, self.sh, self.ph)
        _out_size(x.shape[2], self.ww, self.sw, self.pw)
        if self.ph or self.pw:
            xp = np.pad(x, ((0, 0), (self.ph, self.ph), (self.pw, self.pw), (0, 0)),
                        constant_values=-np.inf)
        else:
            xp = x
        out, arg = kernels.maxpool_fwd(xp, self.wh, self.ww, self.sh, self.sw)
        self._cache = (arg, xp.shape[1], xp.shape[2])
        return out

    def backward(self, dout):
        arg, hp, wp = self._cache
        dxp = kernels.maxpool_bwd(dout, arg, hp, wp)
        return unpad_hw(dxp, self.ph, self.pw)


class Linear(Layer):
    """Affine map on the last axis; leading axes are preserved."""

    def __init__(self, in_dim, out_dim, rng=None, init_std=None):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = Param("weight", _init_weight(rng, (in_dim, out_dim), in_dim, init_std))
        self.b = Param("bias", np.zeros(out_dim))
        self._x = None

    def parameters(self):
        return [self.w, self.b]

    def forward(self, x, train=True):
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"expected last axis {self.in_dim}, got {x.shape}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dout):
        x = self._x
        xf = x.reshape(-1, self.in_dim)
        df = dout.reshape(-1, self.out_dim)
        self.w.grad += xf.T @ df
        self.b.grad += df.sum(axis=0)
        return (df @ self.w.value.T).reshape(x.shape)


class UpsampleNearest2x(Layer):
    """Doubles both spatial axes by pixel repetition."""

    def forward(self, x, train=True):
        if x.ndim != 4:
            raise ShapeError(f"expected a 4-d feature map, got {x.shape}")
        self._shape = x.shape
        return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)

    def backward(self, dout):
        b, h, w, c = self._shape
        return dout.reshape(b, h, 2, w, 2, c).sum(axis=(2, 4))


class Sequential(Layer):
    def __init__(self, *layers):
        self.layers = list(layers)

    def sublayers(self):
        return [(str(i), layer) for i, layer in enumerate(self.layers)]

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def forward(self, x, train=True):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout
