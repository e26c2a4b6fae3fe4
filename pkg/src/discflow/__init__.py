"""Spectral laboratory for the prescribed Gauss/geodesic curvature flow on the disc."""

from .grid import DiscGrid, DiscField, BoundaryField

__all__ = ["DiscGrid", "DiscField", "BoundaryField"]
__version__ = "0.1.0"
