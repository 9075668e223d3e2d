"""Numerical checks of Alexandrov-Fenchel type inequalities for
horospherically convex hypersurfaces in hyperbolic space."""

__version__ = "0.1.0"
