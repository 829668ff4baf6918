"""Curation and evaluation toolkit for translated multimodal instruction data."""

__version__ = "0.1.0"
