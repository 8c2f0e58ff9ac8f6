"""Numerical lab for semilinear pseudo-parabolic flows driven by Hörmander vector fields."""

__version__ = "0.1.0"
