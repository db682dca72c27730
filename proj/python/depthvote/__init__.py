"""Confidence voting and self-supervised losses for stereo disparity.

Maps are 2-D float64 NumPy arrays with NaN marking invalid pixels. Images are
(H, W) or (H, W, C) arrays with intensities in [0, 1].
"""

from ._depthvote import (
    DegenerateInput,
    Error,
    FormatError,
    InvalidInput,
    ShapeMismatch,
    confidence_map,
    d1,
    dds_loss,
    epe,
    generate,
    global_scale,
    ldr_loss,
    lrc_loss,
    optimal_curve,
    pep,
    photometric_loss,
    read_image,
    read_map,
    smoothness_depth,
    smoothness_image,
    sparsification,
    write_image,
    write_map,
)

__all__ = [
    "DegenerateInput",
    "Error",
    "FormatError",
    "InvalidInput",
    "ShapeMismatch",
    "confidence_map",
    "d1",
    "dds_loss",
    "epe",
    "generate",
    "global_scale",
    "ldr_loss",
    "lrc_loss",
    "optimal_curve",
    "pep",
    "photometric_loss",
    "read_image",
    "read_map",
    "smoothness_depth",
    "smoothness_image",
    "sparsification",
    "write_image",
    "write_map",
]
