"""Backend dispatch for the hot kernels.

Selects the numba-compiled implementations unless ``PLATEKIT_NO_NUMBA=1``
(or numba is missing), in which case the vectorized numpy fallbacks are
used. Both backends share signatures and semantics; callers import from
this module only.
"""

from . import accel

if accel.USE_NUMBA:
    from .kernels_numba import (
        conv2d_fwd,
        conv2d_bwd_input,
        conv2d_bwd_kernel,
        depthwise_fwd,
        depthwise_bwd_input,
        depthwise_bwd_kernel,
        maxpool_fwd,
        maxpool_bwd,
        ctc_forward_backward,
    )
else:
    from .kernels_numpy import (
        conv2d_fwd,
        conv2d_bwd_input,
        conv2d_bwd_kernel,
        depthwise_fwd,
        depthwise_bwd_input,
        depthwise_bwd_kernel,
        maxpool_fwd,
        maxpool_bwd,
        ctc_forward_backward,
    )

__all__ = [
    "conv2d_fwd",
    "conv2d_bwd_input",
    "conv2d_bwd_kernel",
    "depthwise_fwd",
    "depthwise_bwd_input",
    "depthwise_bwd_kernel",
    "maxpool_fwd",
    "maxpool_bwd",
    "ctc_forward_backward",
]
