"""Numerical laboratory for variable-exponent Lebesgue norms, Calderon-type
maximal functions, atomic decompositions and polyharmonic potentials."""

__version__ = "0.1.0"
