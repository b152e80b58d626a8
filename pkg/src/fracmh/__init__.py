"""Numerical verification toolkit for the fractional Makai-Hayman inequality."""

__version__ = "0.1.0"
