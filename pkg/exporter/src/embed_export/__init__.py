"""Transformer embedding exporter for the role-detection pipeline's file interface."""

from .export import ExportConfig, ExportError, export

__all__ = ["ExportConfig", "ExportError", "export"]
__version__ = "0.1.0"
