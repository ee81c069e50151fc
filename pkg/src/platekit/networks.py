"""Recognizer networks: column-feature CRNN stacks, their separable
variants, and checkpoint serialization.

Two geometry recipes exist. The 48x160 recipe is the full-size stack:
eight convolutions (the separable variant swaps all but the first for
depthwise+pointwise pairs), rectangular late pools that collapse height
to 1 while keeping roughly one frame per four input columns (T=40),
two 256-unit bidirectional LSTM layers, and a per-frame linear
classifier. The 16x64 recipe is its desk-scale analogue (T=16,
32-unit LSTMs). Each column of the final conv map becomes one frame
vector, flattened height-major then channel.

Checkpoints: text header (meta lines, then one record per tensor with
its shape) followed by raw little-endian float32 blocks in record
order. Loading rebuilds the network from the header meta and fills it,
rejecting any name, shape, or size mismatch.
"""

import numpy as np

from .errors import BuildError, CheckpointError, ShapeError
from .layers import (BatchNorm2D, Conv2D, DepthwiseConv2D, Layer, Linear,
                     MaxPool2D, PointwiseConv2D, ReLU, Sequential)
from .recurrent import BiLSTM
from .tensor import log_softmax, softmax


def round_channels(alpha: float, c: int) -> int:
    """Width-multiplier rounding: half-up, floor of 1."""
    if alpha <= 0:
        raise BuildError("width multiplier must be positive")
    return max(1, int(np.floor(alpha * c + 0.5)))


def feature_sequence(fmap: np.ndarray) -> list:
    """One vector per column of an (H', W', C) map; each vector is the
    column flattened height-major then channel."""
    fmap = np.asarray(fmap)
    if fmap.ndim != 3:
        raise ShapeError(f"expected (H,W,C), got {fmap.shape}")
    h, w, c = fmap.shape
    if h * c == 0:
        raise ShapeError("column vectors would be empty")
    return [fmap[:, t, :].reshape(-1) for t in range(w)]


def _frames_from_maps(x: np.ndarray) -> np.ndarray:
    b, h, w, c = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, w, h * c)


def _maps_from_frames(d: np.ndarray, h: int, c: int) -> np.ndarray:
    b, w, _ = d.shape
    return np.ascontiguousarray(d.reshape(b, w, h, c).transpose(0, 2, 1, 3))


def validate_stack(layers: list, geometry: tuple, in_ch: int) -> tuple:
    """Dry-runs a conv stack on a singleton batch in inference mode and
    returns the output (H', W', C'). A layer that cannot consume its
    input raises a build error naming that layer's index."""
    x = np.zeros((1, geometry[0], geometry[1], in_ch))
    for i, layer in enumerate(layers):
        try:
            x = layer.forward(x, train=False)
        except ShapeError as e:
            raise BuildError(f"layer {i} ({type(layer).__name__}): {e}") from e
    return x.shape[1], x.shape[2], x.shape[3]


class Recognizer(Layer):
    """Conv stack -> per-column frames -> stacked BiLSTMs -> per-frame
    linear scores. The blank class is the last output."""

    def __init__(self, kind, conv, rnns, head, geometry, in_ch, n_classes,
                 hidden, alpha=1.0):
        self.kind = kind
        self.conv = conv
        self.rnns = list(rnns)
        self.head = head
        self.geometry = tuple(geometry)
        self.in_ch = in_ch
        self.n_classes = n_classes
        self.hidden = hidden
        self.alpha = alpha
        hp, wp, cp = validate_stack(conv.layers, geometry, in_ch)
        self.map_h, self.t_frames, self.map_c = hp, wp, cp
        self.frame_dim = hp * cp

    def sublayers(self):
        out = [("conv", self.conv)]
        for i, r in enumerate(self.rnns):
            out.append((f"rnn{i}", r))
        out.append(("head", self.head))
        return out

    def conv_layers(self) -> list:
        return self.conv.layers

    def parameters(self):
        out = self.conv.parameters()
        for r in self.rnns:
            out.extend(r.parameters())
        out.extend(self.head.parameters())
        return out

    @property
    def blank_id(self) -> int:
        return self.n_classes - 1

    def meta(self) -> dict:
        return {
            "kind": self.kind,
            "geometry": f"{self.geometry[0]} {self.geometry[1]}",
            "in_channels": str(self.in_ch),
            "classes": str(self.n_classes),
            "hidden": str(self.hidden),
            "alpha": repr(float(self.alpha)),
        }

    def forward(self, images: np.ndarray, train: bool = True) -> np.ndarray:
        """Per-frame pre-softmax scores, (B, T, classes)."""
        if images.ndim != 4 or images.shape[1:] != (*self.geometry, self.in_ch):
            raise ShapeError(
                f"expected (B,{self.geometry[0]},{self.geometry[1]},{self.in_ch}), "
                f"got {images.shape}")
        x = self.conv.forward(images, train=train)
        seq = _frames_from_maps(x)
        for r in self.rnns:
            seq = r.forward(seq, train=train)
        return self.head.forward(seq, train=train)

    def backward(self, d_logits: np.ndarray) -> np.ndarray:
        d = self.head.backward(d_logits)
        for r in reversed(self.rnns):
            d = r.backward(d)
        d = _maps_from_frames(d, self.map_h, self.map_c)
        return self.conv.backward(d)

    def predict_probs(self, images: np.ndarray) -> np.ndarray:
        """Inference-mode per-frame distributions, (B, T, classes)."""
        return softmax(self.forward(images, train=False), axis=2)

    def predict_log_probs(self, images: np.ndarray) -> np.ndarray:
        return log_softmax(self.forward(images, train=False), axis=2)


def _bn_relu(ch):
    return [BatchNorm2D(ch), ReLU()]


def _late_pool():
    # halves height, keeps one output column per input column (+1 pad)
    return MaxPool2D(window=(2, 2), stride=(2, 1), pad=(0, 1))


def _full_conv_stack(in_ch, rng):
    c = (64, 128, 256, 256, 512, 512, 512, 512)
    return [
        Conv2D(3, 3, in_ch, c[0], pad=(1, 1), rng=rng), ReLU(),
        MaxPool2D(),
        Conv2D(3, 3, c[0], c[1], pad=(1, 1), rng=rng), ReLU(),
        MaxPool2D(),
        Conv2D(3, 3, c[1], c[2], pad=(1, 1), rng=rng), *_bn_relu(c[2]),
        Conv2D(3, 3, c[2], c[3], pad=(1, 1), rng=rng), ReLU(),
        _late_pool(),
        Conv2D(3, 3, c[3], c[4], pad=(1, 1), rng=rng), *_bn_relu(c[4]),
        Conv2D(3, 3, c[4], c[5], pad=(1, 1), rng=rng), ReLU(),
        _late_pool(),
        Conv2D(2, 2, c[5], c[6], rng=rng), *_bn_relu(c[6]),
        Conv2D(2, 2, c[6], c[7], rng=rng), *_bn_relu(c[7]),
    ]


def _toy_conv_stack(in_ch, rng):
    c = (8, 16, 32, 32)
    return [
        Conv2D(3, 3, in_ch, c[0], pad=(1, 1), rng=rng), ReLU(),
        MaxPool2D(),
        Conv2D(3, 3, c[0], c[1], pad=(1, 1), rng=rng), *_bn_relu(c[1]),
        MaxPool2D(),
        Conv2D(3, 3, c[1], c[2], pad=(1, 1), rng=rng), *_bn_relu(c[2]),
        _late_pool(),
        Conv2D(2, 2, c[2], c[3], rng=rng), *_bn_relu(c[3]),
    ]


def _sep_pair(fh, fw, m, n, stride, pad, rng):
    return [
        DepthwiseConv2D(fh, fw, m, stride=stride, pad=pad, rng=rng), *_bn_relu(m),
        PointwiseConv2D(m, n, rng=rng), *_bn_relu(n),
    ]


def _full_sep_stack(in_ch, alpha, rng):
    r = lambda c: round_channels(alpha, c)
    c1, c2, c3, c4, c5 = r(64), r(128), r(256), r(512), r(512)
    final = 512  # unscaled so the recurrent stack is unchanged
    return [
        Conv2D(3, 3, in_ch, c1, pad=(1, 1), rng=rng), *_bn_relu(c1),
        *_sep_pair(3, 3, c1, c2, (2, 2), (1, 1), rng),
        *_sep_pair(3, 3, c2, c3, (2, 2), (1, 1), rng),
        _late_pool(),
        *_sep_pair(3, 3, c3, c4, (1, 1), (1, 1), rng),
        _late_pool(),
        *_sep_pair(2, 2, c4, c5, (1, 1), (0, 0), rng),
        *_sep_pair(2, 2, c5, final, (1, 1), (0, 0), rng),
    ]


def _toy_sep_stack(in_ch, alpha, rng):
    r = lambda c: round_channels(alpha, c)
    c1, c2, c3 = r(8), r(16), r(32)
    final = 32
    return [
        Conv2D(3, 3, in_ch, c1, pad=(1, 1), rng=rng), *_bn_relu(c1),
        *_sep_pair(3, 3, c1, c2, (2, 2), (1, 1), rng),
        *_sep_pair(3, 3, c2, c3, (2, 2), (1, 1), rng),
        _late_pool(),
        *_sep_pair(2, 2, c3, final, (1, 1), (0, 0), rng),
    ]


_RECIPES = {48: ("full", 256, 512), 16: ("toy", 32, 32)}


def _recipe_for(geometry):
    if geometry[0] not in _RECIPES:
        raise BuildError(
            f"no conv recipe for input height {geometry[0]} (supported: 16, 48)")
    return _RECIPES[geometry[0]]


def _assemble(kind, stack, geometry, in_ch, n_classes, hidden, alpha, rng):
    conv = Sequential(*stack)
    hp, wp, cp = validate_stack(conv.layers, geometry, in_ch)
    frame = hp * cp
    rnns = [BiLSTM(frame, hidden, rng), BiLSTM(2 * hidden, hidden, rng)]
    head = Linear(2 * hidden, n_classes, rng)
    return Recognizer(kind, conv, rnns, head, geometry, in_ch, n_classes,
                      hidden, alpha)


def build_crnn(geometry=(48, 160), in_ch: int = 3, n_classes: int = 68,
               hidden: int | None = None, rng=None) -> Recognizer:
    rng = rng or np.random.default_rng(0)
    scale, default_hidden, _ = _recipe_for(geometry)
    hidden = default_hidden if hidden is None else hidden
    stack = _full_conv_stack(in_ch, rng) if scale == "full" else _toy_conv_stack(in_ch, rng)
    return _assemble("crnn", stack, geometry, in_ch, n_classes, hidden, 1.0, rng)


def build_lightcrnn(geometry=(48, 160), in_ch: int = 3, n_classes: int = 68,
                    hidden: int | None = None, alpha: float = 1.0,
                    rng=None) -> Recognizer:
    if alpha <= 0:
        raise BuildError("width multiplier must be positive")
    rng = rng or np.random.default_rng(0)
    scale, default_hidden, _ = _recipe_for(geometry)
    hidden = default_hidden if hidden is None else hidden
    stack = (_full_sep_stack(in_ch, alpha, rng) if scale == "full"
             else _toy_sep_stack(in_ch, alpha, rng))
    return _assemble("lightcrnn", stack, geometry, in_ch, n_classes, hidden,
                     alpha, rng)


def param_count(net) -> int:
    return sum(p.value.size for p in net.parameters())


# --- checkpoint serialization ------------------------------------------------

_MAGIC = "platekit-net 1"

BUILDERS = {}


def register_builder(kind: str, fn) -> None:
    BUILDERS[kind] = fn


def _meta_geometry(meta):
    return tuple(int(v) for v in meta["geometry"].split())


register_builder("crnn", lambda meta, rng: build_crnn(
    _meta_geometry(meta), int(meta["in_channels"]), int(meta["classes"]),
    int(meta["hidden"]), rng))
register_builder("lightcrnn", lambda meta, rng: build_lightcrnn(
    _meta_geometry(meta), int(meta["in_channels"]), int(meta["classes"]),
    int(meta["hidden"]), float(meta["alpha"]), rng))


def collect_named(net, prefix: str = ""):
    """All (name, Param) pairs plus (name, owner, attr) for the running
    statistics that are state but not parameters."""
    params, buffers = [], []
    sub = getattr(net, "sublayers", None)
    if sub is not None:
        for name, child in sub():
            p, b = collect_named(child, f"{prefix}{name}.")
            params.extend(p)
            buffers.extend(b)
    else:
        for p in net.parameters():
            params.append((prefix + p.name, p))
        if isinstance(net, BatchNorm2D):
            buffers.append((prefix + "running_mean", net, "running_mean"))
            buffers.append((prefix + "running_var", net, "running_var"))
    return params, buffers


def save_checkpoint(path: str, net, meta: dict | None = None) -> None:
    meta = dict(meta if meta is not None else net.meta())
    params, buffers = collect_named(net)
    with open(path, "wb") as fh:
        lines = [_MAGIC]
        for k, v in meta.items():
            lines.append(f"meta {k} {v}")
        lines.append("note float32 little-endian row-major blocks follow in record order")
        for name, p in params:
            lines.append(f"param {name} {' '.join(map(str, p.value.shape))}")
        for name, owner, attr in buffers:
            arr = getattr(owner, attr)
            lines.append(f"buffer {name} {' '.join(map(str, arr.shape))}")
        lines.append("end")
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for _, p in params:
            fh.write(p.value.astype("<f4").tobytes())
        for _, owner, attr in buffers:
            fh.write(getattr(owner, attr).astype("<f4").tobytes())


def _read_header(fh, path):
    meta, records = {}, []
    line = fh.readline().decode("ascii", "replace").rstrip("\n")
    if line != _MAGIC:
        raise CheckpointError(f"{path}: bad magic line {line!r}")
    while True:
        raw = fh.readline()
        if not raw:
            raise CheckpointError(f"{path}: header ended without 'end'")
        line = raw.decode("ascii", "replace").rstrip("\n")
        if line == "end":
            return meta, records
        kind, _, rest = line.partition(" ")
        if kind == "meta":
            key, _, value = rest.partition(" ")
            meta[key] = value
        elif kind in ("param", "buffer"):
            parts = rest.split()
            records.append((kind, parts[0], tuple(int(v) for v in parts[1:])))
        elif kind == "note":
            continue
        else:
            raise CheckpointError(f"{path}: unknown header record {kind!r}")


def load_checkpoint(path: str, rng=None):
    """Rebuilds the network named by the header meta and fills its
    tensors from the float32 blocks. Returns (net, meta)."""
    rng = rng or np.random.default_rng(0)
    try:
        fh = open(path, "rb")
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    with fh:
        meta, records = _read_header(fh, path)
        if "kind" not in meta or meta["kind"] not in BUILDERS:
            raise CheckpointError(f"{path}: unknown network kind {meta.get('kind')!r}")
        net = BUILDERS[meta["kind"]](meta, rng)
        params, buffers = collect_named(net)
        by_name = {name: ("param", p) for name, p in params}
        by_name.update({name: ("buffer", (owner, attr)) for name, owner, attr in buffers})
        expected = [("param", n) for n, _ in params] + [("buffer", n) for n, _, _ in buffers]
        got = [(k, n) for k, n, _ in records]
        if got != expected:
            raise CheckpointError(f"{path}: record list does not match the "
                                  f"{meta['kind']} structure")
        for kind, name, shape in records:
            want = by_name[name]
            target_shape = (want[1].value.shape if kind == "param"
                            else getattr(want[1][0], want[1][1]).shape)
            if shape != target_shape:
                raise CheckpointError(f"{path}: {name} has shape {shape}, "
                                      f"expected {target_shape}")
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise CheckpointError(f"{path}: truncated block for {name}")
            data = np.frombuffer(raw, dtype="<f4").astype(float).reshape(shape)
            if kind == "param":
                want[1].value[...] = data
            else:
                setattr(want[1][0], want[1][1], data)
    return net, meta
