"""Multiply-accumulate cost model for convolution stacks.

One MAC is one multiply plus one accumulate. Counting covers
convolutions only (pooling, normalization, activations and the
recurrent stack are excluded on purpose), so two recognizers are
compared by their conv workload alone. Closed forms take the output
spatial extents H and W explicitly; the network walker feeds in each
layer's actual output size.
"""

from dataclasses import dataclass, field

from .errors import InvalidRangeError
from .layers import Conv2D, DepthwiseConv2D, PointwiseConv2D


def conv_cost_standard(f: int, m: int, n: int, h: int, w: int) -> int:
    """Full-rank conv: every output tap mixes all input channels."""
    if min(f, m, n, h, w) < 1:
        raise InvalidRangeError("all extents must be >= 1")
    return f * f * m * n * h * w


def conv_cost_separable(f: int, m: int, n: int, h: int, w: int, alpha: float = 1.0) -> float:
    """Depthwise filter then pointwise mix, with width multiplier applied
    to both depths: F*F*(aM)*H*W + (aM)*(aN)*H*W."""
    if min(f, m, n, h, w) < 1:
        raise InvalidRangeError("all extents must be >= 1")
    if alpha <= 0:
        raise InvalidRangeError("width multiplier must be positive")
    am, an = alpha * m, alpha * n
    out = f * f * am * h * w + am * an * h * w
    return int(out) if alpha == int(alpha) else out


def cost_ratio(f: int, n: int, alpha: float = 1.0) -> float:
    """Separable over standard cost: alpha/N + alpha^2/F^2. Tends to
    1/F^2 as N grows, which for 3x3 kernels is the familiar factor of
    about nine."""
    if f < 1 or n < 1:
        raise InvalidRangeError("F and N must be >= 1")
    if alpha <= 0:
        raise InvalidRangeError("width multiplier must be positive")
    return alpha / n + (alpha * alpha) / (f * f)


@dataclass
class CostBreakdown:
    rows: list = field(default_factory=list)  # (label, kind, macs)

    @property
    def total(self) -> int:
        return sum(r[2] for r in self.rows)

    def table(self) -> str:
        lines = [f"{'layer':<28}{'kind':<12}{'macs':>14}"]
        for label, kind, macs in self.rows:
            lines.append(f"{label:<28}{kind:<12}{macs:>14}")
        lines.append(f"{'total':<28}{'':<12}{self.total:>14}")
        return "\n".join(lines)


def count_macs(net, input_hw: tuple, in_ch: int) -> CostBreakdown:
    """Walk a network's conv stack, tallying MACs per conv layer from the
    actual output sizes the geometry produces. Non-conv layers advance
    the shape but contribute zero rows."""
    h, w = input_hw
    c = in_ch
    out = CostBreakdown()
    for i, layer in enumerate(net.conv_layers()):
        name = f"{i}:{type(layer).__name__}"
        if isinstance(layer, Conv2D):
            ho = (h + 2 * layer.ph - layer.fh) // layer.sh + 1
            wo = (w + 2 * layer.pw - layer.fw) // layer.sw + 1
            out.rows.append((name, "conv",
                             layer.fh * layer.fw * layer.in_ch * layer.out_ch * ho * wo))
            h, w, c = ho, wo, layer.out_ch
        elif isinstance(layer, DepthwiseConv2D):
            ho = (h + 2 * layer.ph - layer.fh) // layer.sh + 1
            wo = (w + 2 * layer.pw - layer.fw) // layer.sw + 1
            out.rows.append((name, "depthwise",
                             layer.fh * layer.fw * layer.ch * ho * wo))
            h, w = ho, wo
        elif isinstance(layer, PointwiseConv2D):
            out.rows.append((name, "pointwise",
                             layer.in_ch * layer.out_ch * h * w))
            c = layer.out_ch
        elif hasattr(layer, "wh"):  # pooling advances geometry only
            h = (h + 2 * layer.ph - layer.wh) // layer.sh + 1
            w = (w + 2 * layer.pw - layer.ww) // layer.sw + 1
    return out
