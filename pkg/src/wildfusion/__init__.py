"""Metadata-augmented camera-trap image classification."""

__version__ = "0.1.0"
