"""Numerical geometric tomography at desk scale (n = 3..6).

Spherical Radon transforms and their duals, Funk-transform inversion,
Busemann-Petty positivity certificates for radial-power bodies, section
volume comparisons, convexity checks, and ellipsoid radial-sum fits.
"""

__version__ = "0.1.0"

from . import bodies, certify, convexity, ellipsoid_fit, harmonics, radon, sphere  # noqa: F401
