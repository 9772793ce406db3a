"""Numerical toolkit for two-mode optimal switching systems and their regularity."""

__version__ = "0.1.0"
