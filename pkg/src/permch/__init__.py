"""Exact tools for identification over noisy permutation channels."""

__version__ = "0.1.0"
