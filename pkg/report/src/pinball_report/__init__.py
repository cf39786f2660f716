"""Batch figure generation from flow-control run artifacts."""

__version__ = "0.1.0"
