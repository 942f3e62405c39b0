"""Slice-aware text classification with a mixture of attentions."""

__version__ = "0.1.0"

from . import attention, autodiff, checkpoint, cli, config, data, errors, metrics, model, rng, slicing, synthetic, training

__all__ = [
    "attention",
    "autodiff",
    "checkpoint",
    "cli",
    "config",
    "data",
    "errors",
    "metrics",
    "model",
    "rng",
    "slicing",
    "synthetic",
    "training",
    "__version__",
]
