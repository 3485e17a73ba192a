"""Unsupervised land-use clustering and mapping for geotagged street imagery."""

__version__ = "0.1.0"
