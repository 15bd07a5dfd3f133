"""Graphon games of optimal investment solved with a deep BSDE shooting method."""

__version__ = "0.1.0"
