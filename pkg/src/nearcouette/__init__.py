"""Spectral toolkit for near-Couette channel flow stability."""

__version__ = "0.1.0"
