"""LSTM layers with full backpropagation through time.

Weights per direction are packed as Wx (D, 4H), Wh (H, 4H), b (4H) with
gate order input, forget, cell, output. Sequences are (B, T, D); the
bidirectional wrapper concatenates forward and time-reversed passes to
(B, T, 2H). These stay on plain numpy matmul since BLAS dominates their
runtime either way.
"""

import numpy as np

from .errors import ShapeError
from .layers import Layer, Param
from .tensor import sigmoid


class LSTM(Layer):
    def __init__(self, in_dim: int, hidden: int, rng=None):
        self.in_dim = in_dim
        self.hidden = hidden
        rng = rng or np.random.default_rng(0)
        k = 1.0 / np.sqrt(hidden)
        self.wx = Param("wx", rng.uniform(-k, k, (in_dim, 4 * hidden)))
        self.wh = Param("wh", rng.uniform(-k, k, (hidden, 4 * hidden)))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # open forget gates at the start of training
        self.b = Param("b", b)
        self._cache = None

    def parameters(self):
        return [self.wx, self.wh, self.b]

    def forward(self, x, train=True):
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"expected (B,T,{self.in_dim}), got {x.shape}")
        bsz, t_len, _ = x.shape
        hdim = self.hidden
        h = np.zeros((bsz, hdim))
        c = np.zeros((bsz, hdim))
        out = np.empty((bsz, t_len, hdim))
        steps = []
        for t in range(t_len):
            xt = x[:, t, :]
            z = xt @ self.wx.value + h @ self.wh.value + self.b.value
            i = sigmoid(z[:, :hdim])
            f = sigmoid(z[:, hdim:2 * hdim])
            g = np.tanh(z[:, 2 * hdim:3 * hdim])
            o = sigmoid(z[:, 3 * hdim:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((xt, h, c, i, f, g, o, tc))
            h, c = h_new, c_new
            out[:, t, :] = h
        self._cache = (steps, x.shape)
        return out

    def backward(self, dout):
        steps, xshape = self._cache
        bsz, t_len, _ = xshape
        hdim = self.hidden
        dx = np.empty(xshape)
        dh_next = np.zeros((bsz, hdim))
        dc_next = np.zeros((bsz, hdim))
        for t in range(t_len - 1, -1, -1):
            xt, h_prev, c_prev, i, f, g, o, tc = steps[t]
            dh = dout[:, t, :] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc ** 2)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g ** 2),
                do * o * (1.0 - o),
            ], axis=1)
            self.wx.grad += xt.T @ dz
            self.wh.grad += h_prev.T @ dz
            self.b.grad += dz.sum(axis=0)
            dx[:, t, :] = dz @ self.wx.value.T
            dh_next = dz @ self.wh.value.T
        return dx


class BiLSTM(Layer):
    """Forward and reversed LSTM over the same input, outputs concatenated."""

    def __init__(self, in_dim: int, hidden: int, rng=None):
        rng = rng or np.random.default_rng(0)
        self.fwd = LSTM(in_dim, hidden, rng)
        self.bwd = LSTM(in_dim, hidden, rng)
        self.hidden = hidden

    def sublayers(self):
        return [("fwd", self.fwd), ("bwd", self.bwd)]

    def parameters(self):
        return self.fwd.parameters() + self.bwd.parameters()

    def forward(self, x, train=True):
        a = self.fwd.forward(x, train=train)
        b = self.bwd.forward(x[:, ::-1, :], train=train)[:, ::-1, :]
        return np.concatenate([a, b], axis=2)

    def backward(self, dout):
        h = self.hidden
        da = self.fwd.backward(dout[:, :, :h])
        db = self.bwd.backward(dout[:, ::-1, h:])[:, ::-1, :]
        return da + db
