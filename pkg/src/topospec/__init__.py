"""Spectral diagnostics of multi-agent communication graphs."""

__version__ = "0.1.0"
