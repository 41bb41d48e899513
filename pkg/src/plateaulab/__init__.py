"""Barren-plateau diagnostics for periodic-structure variational ansatzes."""

__version__ = "0.1.0"
