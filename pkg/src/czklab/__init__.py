"""Concurrent zero-knowledge lower-bound laboratory."""

__version__ = "0.1.0"
