"""Numerical laboratory for SL(3,R): decompositions, projections to a
totally geodesic plane, floating planes, bulging deformations and
fractal-dimension estimates of orbit closures."""

__version__ = "0.1.0"
