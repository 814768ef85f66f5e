"""Centrally-symmetric star bodies and their geometric functionals.

A star body is carried by its radial function rho on S^{n-1}: strictly
positive, continuous, and even. Primitives (ball, ellipsoid, lp ball,
perturbed ball) are closed-form; composites (power, k-radial sum, dilate)
evaluate lazily so that grids enter only at integration time.

Volumes use the polar formula Vol(K) = Vol(D_n) * E_sigma[rho^n] against the
probability measure, so the unit ball integrates to exactly Vol(D_n).
"""

import math
import threading

import numpy as np

from .errors import InvalidArgumentError, InvalidBodyError
from .harmonics import zonal_value
from .sphere import (
    Subspace,
    hyperplane_orthogonal_to,
    integrate_sphere,
    sample_sphere_uniform,
    sphere_quadrature,
    subsphere_quadrature,
    unit_vector,
)


def unit_ball_volume(n):
    """Lebesgue volume of the n-dimensional Euclidean unit ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


class StarBody:
    """Base class; subclasses implement rho(points) for (N, n) unit points."""

    dim = None
    kind = "star_body"

    def rho(self, points):
        raise NotImplementedError

    def radial_one(self, theta):
        return float(self.rho(np.asarray(theta, dtype=float)[None, :])[0])

    def descriptor(self):
        raise InvalidArgumentError(f"{self.kind} body has no JSON descriptor")

    def __repr__(self):
        return f"<{type(self).__name__} dim={self.dim}>"


def radial(body, theta):
    """rho_K(theta) for a single unit direction theta."""
    theta = unit_vector(theta)
    value = body.radial_one(theta)
    if not np.isfinite(value) or value <= 0.0:
        raise InvalidBodyError(f"radial function is not positive at {theta}")
    return value


def minkowski_functional(body, x):
    """Gauge ||x||_K = |x| / rho_K(x/|x|); zero at the origin."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return 0.0
    return norm / radial(body, x / norm)


class Ball(StarBody):
    kind = "ball"

    def __init__(self, dim):
        if dim < 2:
            raise InvalidArgumentError("dimension must be >= 2")
        self.dim = dim

    def rho(self, points):
        return np.ones(len(np.atleast_2d(points)))

    def descriptor(self):
        return {"dim": self.dim, "type": "ball"}


class Ellipsoid(StarBody):
    """Unit ball of the quadratic form x' A x: rho(theta) = (theta' A theta)^(-1/2)."""

    kind = "ellipsoid"
    EIGENVALUE_FLOOR = 1e-12

    def __init__(self, matrix, path="ellipsoid"):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidArgumentError(f"{path}.matrix must be square")
        if np.abs(a - a.T).max() > 1e-12 * max(1.0, np.abs(a).max()):
            raise InvalidBodyError(f"{path}.matrix not symmetric")
        eigvals = np.linalg.eigvalsh(a)
        if eigvals.min() < self.EIGENVALUE_FLOOR:
            raise InvalidBodyError(f"{path}.matrix not positive definite")
        self.matrix = 0.5 * (a + a.T)
        self.dim = a.shape[0]

    def rho(self, points):
        points = np.atleast_2d(points)
        q = np.einsum("ij,jk,ik->i", points, self.matrix, points)
        return 1.0 / np.sqrt(q)

    def semi_axes(self):
        return np.sort(np.linalg.eigvalsh(self.matrix)) ** -0.5

    def descriptor(self):
        return {"dim": self.dim, "type": "ellipsoid", "matrix": self.matrix.tolist()}


class LpBall(StarBody):
    """Unit ball of the l_p norm, p >= 1 (smooth for even p >= 2)."""

    kind = "lp"

    def __init__(self, dim, p):
        if p < 1:
            raise InvalidArgumentError("lp ball requires p >= 1")
        self.dim = dim
        self.p = float(p)

    def rho(self, points):
        points = np.atleast_2d(points)
        return np.sum(np.abs(points) ** self.p, axis=1) ** (-1.0 / self.p)

    def descriptor(self):
        return {"dim": self.dim, "type": "lp", "p": self.p}


class ZonalPerturbation:
    """Even zonal perturbation phi(theta) = C_d(theta . axis)/C_d(1), |phi| <= 1."""

    def __init__(self, dim, degree, axis=None, deriv_bound=None):
        if degree % 2 != 0 or degree < 2:
            raise InvalidArgumentError("zonal perturbation degree must be even and >= 2")
        self.dim = dim
        self.degree = degree
        self.axis = unit_vector(axis if axis is not None else np.eye(dim)[-1])
        # crude Markov-type bound when none supplied; used only as metadata
        self.deriv_bound = float(deriv_bound) if deriv_bound is not None else float(degree**2)

    def __call__(self, points):
        points = np.atleast_2d(points)
        return zonal_value((self.dim - 2) / 2.0, self.degree, points @ self.axis)

    def descriptor(self):
        return {
            "kind": "zonal",
            "degree": self.degree,
            "axis": self.axis.tolist(),
            "deriv_bound": self.deriv_bound,
        }


class PerturbedBall(StarBody):
    """rho = 1 + epsilon * phi for an even perturbation with sup |phi| <= 1."""

    kind = "perturbed_ball"

    def __init__(self, dim, epsilon, phi, check_grid=2048):
        self.dim = dim
        self.epsilon = float(epsilon)
        self.phi = phi
        probe = sample_sphere_uniform(dim, check_grid, 23)
        vals = 1.0 + self.epsilon * np.asarray(phi(probe), dtype=float)
        if vals.min() <= 0.0:
            raise InvalidBodyError("perturbed ball has non-positive radial values")

    def rho(self, points):
        points = np.atleast_2d(points)
        return 1.0 + self.epsilon * np.asarray(self.phi(points), dtype=float)

    def descriptor(self):
        if not isinstance(self.phi, ZonalPerturbation):
            raise InvalidArgumentError("only zonal perturbations serialize to JSON")
        return {
            "dim": self.dim,
            "type": "perturbed_ball",
            "epsilon": self.epsilon,
            "phi": self.phi.descriptor(),
        }


def perturbed_ball(dim, epsilon, phi):
    """Build the body rho = 1 + epsilon * phi, validating positivity."""
    return PerturbedBall(dim, epsilon, phi)


class PowerBody(StarBody):
    """rho = rho_base^alpha."""

    kind = "power"

    def __init__(self, base, alpha):
        if alpha <= 0:
            raise InvalidArgumentError("power transform needs alpha > 0")
        self.base = base
        self.alpha = float(alpha)
        self.dim = base.dim

    def rho(self, points):
        return self.base.rho(points) ** self.alpha

    def descriptor(self):
        return {
            "dim": self.dim,
            "type": "power",
            "alpha": self.alpha,
            "base": self.base.descriptor(),
        }


def power_transform(body, alpha):
    return PowerBody(body, alpha)


class RadialSumBody(StarBody):
    """k-radial sum: rho = (sum_j rho_j^k)^(1/k)."""

    kind = "radial_sum"

    def __init__(self, bodies, k):
        if not bodies:
            raise InvalidArgumentError("radial sum of an empty list")
        if k <= 0:
            raise InvalidArgumentError("radial sum needs k > 0")
        dims = {b.dim for b in bodies}
        if len(dims) != 1:
            raise InvalidArgumentError(f"mixed ambient dimensions {sorted(dims)}")
        self.bodies = list(bodies)
        self.k = float(k)
        self.dim = bodies[0].dim

    def rho(self, points):
        points = np.atleast_2d(points)
        acc = np.zeros(len(points))
        for b in self.bodies:
            acc += b.rho(points) ** self.k
        return acc ** (1.0 / self.k)

    def descriptor(self):
        return {
            "dim": self.dim,
            "type": "radial_sum",
            "k": self.k,
            "bodies": [b.descriptor() for b in self.bodies],
        }


def radial_sum_k(bodies, k):
    return RadialSumBody(bodies, k)


class DilateBody(StarBody):
    kind = "dilate"

    def __init__(self, base, factor):
        if factor <= 0:
            raise InvalidArgumentError("dilation factor must be positive")
        self.base = base
        self.factor = float(factor)
        self.dim = base.dim

    def rho(self, points):
        return self.factor * self.base.rho(points)

    def descriptor(self):
        return {
            "dim": self.dim,
            "type": "dilate",
            "factor": self.factor,
            "base": self.base.descriptor(),
        }


def dilate(body, factor):
    return DilateBody(body, factor)


class ExpansionBody(StarBody):
    """Star body whose radial function is a harmonic expansion (must stay positive)."""

    kind = "expansion"

    def __init__(self, expansion):
        self.expansion = expansion
        self.dim = expansion.dim

    def rho(self, points):
        return self.expansion(points)


class IntersectionBody(StarBody):
    """Intersection body of L: rho(theta) = Vol(L cap theta-perp).

    Section volumes are evaluated lazily with per-direction caching; the
    cache fill is idempotent so concurrent evaluation is safe.
    """

    kind = "intersection_body"

    def __init__(self, base, rule_size=512):
        if base.dim < 2:
            raise InvalidArgumentError("intersection body needs n >= 2")
        self.base = base
        self.dim = base.dim
        self.rule_size = rule_size
        self._cache = {}
        self._lock = threading.Lock()

    def rho(self, points):
        points = np.atleast_2d(points)
        out = np.empty(len(points))
        for i, theta in enumerate(points):
            key = np.round(theta, 14).tobytes()
            value = self._cache.get(key)
            if value is None:
                section = hyperplane_orthogonal_to(theta)
                value = section_volume(self.base, section, rule_size=self.rule_size)
                with self._lock:
                    self._cache.setdefault(key, value)
            out[i] = value
        return out


def intersection_body_of(body, rule_size=512):
    return IntersectionBody(body, rule_size=rule_size)


def volume(body, rule=None, rule_size=4096, seed=0):
    """Lebesgue volume via polar coordinates: Vol(D_n) * E[rho^n]."""
    if rule is None:
        kind = "product_gauss" if body.dim <= 3 else "symmetrized"
        rule = sphere_quadrature(body.dim, rule_size, kind=kind, seed=seed)
    mean = integrate_sphere(lambda pts: body.rho(pts) ** body.dim, rule)
    return unit_ball_volume(body.dim) * mean


def section_volume(body, subspace, rule=None, rule_size=512, seed=0):
    """m-dimensional volume of K cap E for an m-dimensional subspace E.

    For m = 1 this is the chord length 2 * rho averaged over the antipodal
    pair (equal to 2 rho for even bodies).
    """
    if not isinstance(subspace, Subspace):
        subspace = Subspace(np.asarray(subspace))
    m = subspace.dim_sub
    if rule is None:
        rule = subsphere_quadrature(subspace, max(rule_size, 2), seed=seed)
    mean = integrate_sphere(lambda pts: body.rho(pts) ** m, rule)
    return unit_ball_volume(m) * mean


def radial_distance(body_a, body_b, grid=None, grid_size=4096, seed=0):
    """Grid sup-norm distance between radial functions (a lower bound on d_r)."""
    if body_a.dim != body_b.dim:
        raise InvalidArgumentError("bodies live in different dimensions")
    if grid is None:
        grid = sample_sphere_uniform(body_a.dim, grid_size, seed)
    return float(np.abs(body_a.rho(grid) - body_b.rho(grid)).max())


def validate_body(body, grid_size=10000, seed=17):
    """Check positivity and evenness of rho on a random test grid."""
    probe = sample_sphere_uniform(body.dim, grid_size, seed)
    vals = body.rho(probe)
    if not np.all(np.isfinite(vals)) or vals.min() <= 0.0:
        raise InvalidBodyError("radial function must be finite and positive")
    if np.abs(vals - body.rho(-probe)).max() > 1e-12 * max(1.0, vals.max()):
        raise InvalidBodyError("radial function must be even")
    return True


def body_from_descriptor(desc, path="body"):
    """Construct a star body from its JSON descriptor.

    Raises InvalidArgumentError / InvalidBodyError with messages naming the
    offending descriptor element.
    """
    if not isinstance(desc, dict):
        raise InvalidArgumentError(f"{path} must be a JSON object")
    try:
        dim = int(desc["dim"])
        kind = desc["type"]
    except KeyError as missing:
        raise InvalidArgumentError(f"{path} is missing field {missing}") from None
    if kind == "ball":
        return Ball(dim)
    if kind == "ellipsoid":
        if "matrix" not in desc:
            raise InvalidArgumentError(f"{path}.matrix is required for an ellipsoid")
        return Ellipsoid(desc["matrix"], path=path if path != "body" else "ellipsoid")
    if kind == "lp":
        return LpBall(dim, float(desc.get("p", 2.0)))
    if kind == "perturbed_ball":
        phi_spec = desc.get("phi")
        if not isinstance(phi_spec, dict) or phi_spec.get("kind") != "zonal":
            raise InvalidArgumentError(f"{path}.phi must be a zonal perturbation spec")
        phi = ZonalPerturbation(
            dim,
            int(phi_spec["degree"]),
            axis=phi_spec.get("axis"),
            deriv_bound=phi_spec.get("deriv_bound"),
        )
        return PerturbedBall(dim, float(desc.get("epsilon", 0.0)), phi)
    if kind == "power":
        return PowerBody(body_from_descriptor(desc["base"], f"{path}.base"), float(desc["alpha"]))
    if kind == "radial_sum":
        bodies = [
            body_from_descriptor(b, f"{path}.bodies[{i}]")
            for i, b in enumerate(desc.get("bodies", []))
        ]
        return RadialSumBody(bodies, float(desc.get("k", 1.0)))
    if kind == "dilate":
        return DilateBody(body_from_descriptor(desc["base"], f"{path}.base"), float(desc["factor"]))
    raise InvalidArgumentError(f"{path}.type {kind!r} is not a known body type")
