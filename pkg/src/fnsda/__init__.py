"""Fourier neural simulator with automatic spectral mode partition.

A surrogate for families of dynamical systems that splits its retained
Fourier modes into shared and environment-specific groups via a
learnable gate, and adapts to a new environment by updating only a
low-dimensional context vector plus one activation slope per layer.
"""

__version__ = "0.1.0"
