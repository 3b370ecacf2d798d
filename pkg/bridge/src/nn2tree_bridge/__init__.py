"""Checkpoint bridge: PyTorch models to the tree-compiler weight schema."""

from .export import (
    ExportCheckFailed,
    ExportManifest,
    UnsupportedLayerError,
    check_against_vectors,
    export_checkpoint,
)

__version__ = "0.1.0"
