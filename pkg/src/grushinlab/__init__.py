"""Numerical laboratory for a Baouendi-Grushin type degenerate operator.

Subpackages by theme:

* ``geometry`` -- gauge, quasi-distance, anisotropic dilations, ellipsoids.
* ``closedforms`` -- exact 2-jets: harmonic kernel, gauge powers,
  supersolution, flat-boundary barrier; the operators applied to jets.
* ``coefficients`` -- coefficient-field families and the ellipticity audit.
* ``fdsolver`` -- monotone finite differences on half-space boxes.
* ``experiments`` -- scripted measurements: boundary growth, Hoelder
  modulus, oscillation decay, supersolution scan, far-field decay fit,
  global comparison bound.
* ``cli`` -- JSON-configured command line front end.
"""

from .geometry import GrushinParams, HalfSpacePoint

__all__ = ["GrushinParams", "HalfSpacePoint"]
__version__ = "0.1.0"
