"""The m-dimensional spherical Radon transform, its dual, and the Funk
transform on star bodies.

Fourier transforms of homogeneous functions are never computed as
oscillatory integrals: both directions of the Fourier-Radon bridge are
realized through Radon-transform identities, with the explicit constant
pi (n-1) Vol(D_{n-1}).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import unit_ball_volume
from .errors import BandlimitInsufficientError, InvalidArgumentError
from .harmonics import expand, funk_inverse, funk_transform, get_basis
from .sphere import (
    Subspace,
    hyperplane_orthogonal_to,
    integrate_sphere,
    mean_with_se,
    sample_subspace_containing,
    span,
    subsphere_quadrature,
    unit_vector,
)

DEFAULT_RESIDUAL_TOL = 1e-3


def radon_forward(f, subspace, rule_size=256, kind=None, seed=0):
    """R_m(f)(E): mean of f over S^{n-1} cap E against the probability measure."""
    if not isinstance(subspace, Subspace):
        subspace = Subspace(np.asarray(subspace))
    rule = subsphere_quadrature(subspace, rule_size, kind=kind, seed=seed)
    return integrate_sphere(f, rule)


@dataclass
class GrassmannDensity:
    """A continuous function on G(n, m), re-evaluable at fresh subspaces.

    The generator is the source of truth; samples record subspaces already
    visited (for diagnostics and serialization).
    """

    dim_ambient: int
    dim_sub: int
    generator: object
    description: str = ""
    samples: list = field(default_factory=list)

    def __call__(self, subspace):
        value = float(self.generator(subspace))
        if not np.isfinite(value):
            raise InvalidArgumentError("Grassmann density produced a non-finite value")
        self.samples.append((subspace, value))
        return value


def radon_dual(density, theta, mc_count=256, seed=0):
    """R_m^* of a Grassmann density at theta: Monte Carlo mean of the density
    over Haar subspaces containing theta. Returns (value, standard_error)."""
    theta = unit_vector(theta)
    anchor = span(theta)
    m = density.dim_sub
    values = np.empty(mc_count)
    for i in range(mc_count):
        sub = sample_subspace_containing(anchor, m, [seed, i])
        values[i] = density(sub)
    return mean_with_se(values)


def _expand_body(body, bandlimit, basis=None, resid_tol=DEFAULT_RESIDUAL_TOL):
    if basis is None:
        basis = get_basis(body.dim, bandlimit)
    expansion = expand(body.rho, body.dim, bandlimit, basis=basis)
    sup = float(np.abs(body.rho(basis.grid.nodes)).max())
    if expansion.residual > resid_tol * sup:
        raise BandlimitInsufficientError(expansion.residual, resid_tol * sup, bandlimit)
    return expansion


def funk_transform_body(body, bandlimit, basis=None, resid_tol=DEFAULT_RESIDUAL_TOL):
    """Expansion of R(rho_K): band d of the expansion scaled by lambda_{n,d}.

    Raises BandlimitInsufficientError when rho_K cannot be represented to the
    relative residual tolerance at this bandlimit.
    """
    return funk_transform(_expand_body(body, bandlimit, basis, resid_tol))


def funk_inverse_body(body, bandlimit, basis=None, resid_tol=DEFAULT_RESIDUAL_TOL):
    """The function u with R(u) = rho_K band-by-band (R^{-1} of the radial
    function), computed spectrally."""
    return funk_inverse(_expand_body(body, bandlimit, basis, resid_tol))


def fourier_constant(n):
    """The constant pi (n-1) Vol(D_{n-1}) of the Fourier-Radon identity."""
    return math.pi * (n - 1) * unit_ball_volume(n - 1)


def fourier_norm_power(body, theta, rule_size=512, kind=None, seed=0):
    """Fourier transform of ||.||_L^{-n+1} at theta, through the Radon identity:

        (||.||_L^{-n+1})^(theta) = pi (n-1) Vol(D_{n-1}) R(rho_L^{n-1})(theta),

    evaluated by subsphere quadrature over theta-perp.
    """
    theta = unit_vector(theta)
    n = body.dim
    hyper = hyperplane_orthogonal_to(theta)
    value = radon_forward(
        lambda pts: body.rho(pts) ** (n - 1), hyper, rule_size=rule_size, kind=kind, seed=seed
    )
    return fourier_constant(n) * value


def fourier_norm_inverse(expansion):
    """Inverse direction of the Fourier-Radon bridge on a bandlimited surrogate.

    Given an expansion of theta -> (||.||_L^{-n+1})^(theta), returns the
    expansion of (2 pi)^n rho_L^{n-1} via the spectral Radon inverse.
    """
    n = expansion.dim
    unscaled = funk_inverse(expansion)
    return unscaled.scale_bands({d: (2.0 * math.pi) ** n / fourier_constant(n) for d in unscaled.degrees})
