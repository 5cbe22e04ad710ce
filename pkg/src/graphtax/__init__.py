"""Perturbation-based sensitivity profiling and taxonomy of graph datasets."""

__version__ = "0.1.0"
