"""Numerical checks for curvature pinching on Kähler manifolds.

The package computes curvature of Kähler metrics given on coordinate
charts, splits it into scalar, traceless Ricci (``E``) and Bochner (``B``)
parts, tests the pointwise algebraic inequalities between these pieces on
random and model data, and evaluates pinching conditions on a small zoo of
model geometries.
"""

__version__ = "0.1.0"
