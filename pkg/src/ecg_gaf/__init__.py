"""ECG heartbeat classification from Gramian Angular Field images."""

__version__ = "0.1.0"

from .gaf import EncoderConfig, GafImage, encode, encode_batch, gadf, gasf, paa, rescale, resize_bilinear
from .model import Model, ModelConfig, build, load_model
from .signal_io import (
    Dataset,
    HeartbeatRecord,
    class_histogram,
    load_csv,
    load_ptb,
    load_ptb_split,
    stratified_subsample,
)

__all__ = [
    "Dataset",
    "EncoderConfig",
    "GafImage",
    "HeartbeatRecord",
    "Model",
    "ModelConfig",
    "build",
    "class_histogram",
    "encode",
    "encode_batch",
    "gadf",
    "gasf",
    "load_csv",
    "load_model",
    "load_ptb",
    "load_ptb_split",
    "paa",
    "rescale",
    "resize_bilinear",
    "stratified_subsample",
]
