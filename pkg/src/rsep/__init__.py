"""Numerical checks of R-separability for diagonal metrics."""

__version__ = "0.1.0"
