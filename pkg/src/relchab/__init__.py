"""Relative symmetric Chabauty tools."""

__version__ = "0.1.0"
