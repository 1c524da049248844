"""Numerical polynomial hulls over the circle and the H-infinity min-max problem."""
__version__ = "0.1.0"
