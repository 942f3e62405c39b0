"""Offline embedding exporter for the SLCE binary cache format."""

__version__ = "0.1.0"

from .export import ExportError, ExportJob, run_export

__all__ = ["ExportError", "ExportJob", "run_export", "__version__"]
