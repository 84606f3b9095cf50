"""Pansharpening via convolutional sparse coding.

Thin Python face over the C++ core: build or load a network, run the
classical solver or the unfolded forward pass, train on (pan, ms_up, truth)
triples, and score results with the standard reduced/full-resolution metrics.
Images are numpy arrays shaped (H, W, bands); feature stacks are (H, W, K).
"""

from ._core import (
    ConfigError,
    DivergenceError,
    IoError,
    NetworkParams,
    ShapeError,
    UndefinedMetricError,
    __version__,
    blur_decimate,
    conv2d_adjoint,
    conv2d_same,
    d_lambda,
    d_s,
    ergas,
    estimate_step_size,
    evaluate_full,
    evaluate_reduced,
    exp_upsample,
    load_checkpoint,
    make_network,
    network_forward,
    q2n,
    qnr,
    read_raster,
    reconstruct,
    sam,
    save_checkpoint,
    scc,
    set_thread_count,
    soft_threshold,
    solve,
    synthesize_ms,
    synthesize_pan,
    thread_count,
    train,
    write_raster,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "IoError",
    "NetworkParams",
    "ShapeError",
    "UndefinedMetricError",
    "__version__",
    "blur_decimate",
    "conv2d_adjoint",
    "conv2d_same",
    "d_lambda",
    "d_s",
    "ergas",
    "estimate_step_size",
    "evaluate_full",
    "evaluate_reduced",
    "exp_upsample",
    "load_checkpoint",
    "make_network",
    "network_forward",
    "q2n",
    "qnr",
    "read_raster",
    "reconstruct",
    "sam",
    "save_checkpoint",
    "scc",
    "set_thread_count",
    "soft_threshold",
    "solve",
    "synthesize_ms",
    "synthesize_pan",
    "thread_count",
    "train",
    "write_raster",
]
