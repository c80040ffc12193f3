"""Streaming CPU-real-time speech enhancement engine and benchmark harness."""

from .dsp import StftConfig, latency_samples
from .model import (
    ModelConfig,
    apply_mask,
    build_model,
    forward_frame,
    forward_sequence,
    parameter_count,
    preset_config,
    shape_plan,
)
from .runtime import EnhancerSession, create_session, enhance_signal, process_offline
from .variants import make_variant
from .weights_io import WeightBundle, fuse_batchnorm, load, random_bundle, save

__version__ = "0.1.0"

__all__ = [
    "StftConfig", "latency_samples",
    "ModelConfig", "preset_config", "build_model", "parameter_count", "shape_plan",
    "forward_frame", "forward_sequence", "apply_mask",
    "EnhancerSession", "create_session", "enhance_signal", "process_offline",
    "make_variant",
    "WeightBundle", "load", "save", "random_bundle", "fuse_batchnorm",
    "__version__",
]
