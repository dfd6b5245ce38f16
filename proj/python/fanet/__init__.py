"""Python bindings for the FANet desk-scale segmentation toolkit."""

import json
from pathlib import Path

from ._core import (
    ConfigError,
    DimensionError,
    IoError,
    Model,
    NumericalError,
    ParseError,
    ValidationError,
    contrast_enhance,
    contrast_map,
    conv2d,
    enhance_combine,
    generate_scene,
    gradcheck,
    metrics_from_confusion,
    poly_lr,
    run_cli,
    sharpen,
)


def load_model(checkpoint, config=None):
    """Model from a checkpoint; the architecture comes from `config` (a path or
    dict) or from config.json next to the checkpoint."""
    checkpoint = Path(checkpoint)
    if config is None:
        sibling = checkpoint.parent / "config.json"
        config = json.loads(sibling.read_text()) if sibling.exists() else {}
    elif not isinstance(config, dict):
        config = json.loads(Path(config).read_text())
    return Model(json.dumps(config), str(checkpoint))


__all__ = [
    "ConfigError",
    "DimensionError",
    "IoError",
    "Model",
    "NumericalError",
    "ParseError",
    "ValidationError",
    "contrast_enhance",
    "contrast_map",
    "conv2d",
    "enhance_combine",
    "generate_scene",
    "gradcheck",
    "load_model",
    "metrics_from_confusion",
    "poly_lr",
    "run_cli",
    "sharpen",
]
