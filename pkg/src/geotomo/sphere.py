"""Spheres, subspaces, Haar sampling, and quadrature.

All spherical and Grassmannian measures here are probability-normalized.
Quadrature rules therefore integrate the constant 1 to 1, and surface-area
factors appear only in the volume formulas of :mod:`geotomo.bodies`.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_gegenbauer

from .errors import InvalidArgumentError, NumericDomainError

ORTHONORMALITY_TOL = 1e-10


def unit_vector(v):
    """Normalize v to the unit sphere; rejects the zero vector."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise InvalidArgumentError("cannot normalize the zero vector")
    return v / norm


def sample_sphere_uniform(n, count, seed):
    """Draw `count` i.i.d. uniform directions on S^{n-1}, shape (count, n).

    Deterministic for a fixed seed (normalized standard Gaussian vectors).
    """
    if n < 2:
        raise InvalidArgumentError(f"ambient dimension must be >= 2, got {n}")
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of R^n represented by an orthonormal frame.

    frame has shape (n, m) with orthonormal columns spanning the subspace.
    """

    frame: np.ndarray

    def __post_init__(self):
        frame = np.atleast_2d(np.asarray(self.frame, dtype=float))
        if frame.ndim != 2:
            raise InvalidArgumentError("frame must be a 2-d array")
        object.__setattr__(self, "frame", frame)
        n, m = frame.shape
        if not (1 <= m <= n):
            raise InvalidArgumentError(f"need 1 <= m <= n, got frame shape {frame.shape}")
        gram = frame.T @ frame
        if np.abs(gram - np.eye(m)).max() > ORTHONORMALITY_TOL:
            raise InvalidArgumentError("frame columns are not orthonormal")

    @property
    def dim_ambient(self):
        return self.frame.shape[0]

    @property
    def dim_sub(self):
        return self.frame.shape[1]

    def projector(self):
        return self.frame @ self.frame.T

    def orthogonal_complement(self):
        """Subspace spanned by the orthogonal complement of this one."""
        n, m = self.frame.shape
        if m == n:
            raise InvalidArgumentError("complement of the full space is trivial")
        # full QR of the frame; the trailing columns span the complement
        q, _ = np.linalg.qr(self.frame, mode="complete")
        comp = q[:, m:]
        # make the result independent of QR sign conventions
        return Subspace(_fix_gauge(comp))

    def contains_vector(self, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - self.frame @ (self.frame.T @ v)) <= tol * max(1.0, np.linalg.norm(v))


def span(*vectors):
    """Subspace spanned by the given (independent) vectors."""
    a = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    return Subspace(q)


def hyperplane_orthogonal_to(theta):
    """The hyperplane theta-perp as a Subspace."""
    theta = unit_vector(theta)
    n = theta.size
    # complete theta to an orthonormal basis, dropping the identity column
    # most aligned with theta to keep the completion well conditioned
    drop = int(np.argmax(np.abs(theta)))
    cols = [i for i in range(n) if i != drop]
    basis = np.column_stack([theta, np.eye(n)[:, cols]])
    q, _ = np.linalg.qr(basis)
    return Subspace(_fix_gauge(q[:, 1:]))


def _fix_gauge(frame):
    """Deterministic orthonormal frame for a given span (column signs fixed)."""
    f = frame.copy()
    for j in range(f.shape[1]):
        i = int(np.argmax(np.abs(f[:, j])))
        if f[i, j] < 0:
            f[:, j] = -f[:, j]
    return f


def _orthonormalize_gaussian(g):
    """QR orthonormalization with positive diagonal of R (deterministic gauge)."""
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample_grassmann_haar(n, m, seed):
    """Haar-distributed m-dimensional subspace of R^n."""
    if not (1 <= m <= n):
        raise InvalidArgumentError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    return Subspace(_orthonormalize_gaussian(rng.standard_normal((n, m))))


def sample_subspace_containing(anchor, m, seed, contained=False):
    """Haar m-dimensional subspace containing the anchor.

    With contained=True, samples a Haar m-dimensional subspace inside the
    anchor instead (anchor dimension must then be >= m).
    """
    if not isinstance(anchor, Subspace):
        anchor = Subspace(np.asarray(anchor))
    n, j = anchor.frame.shape
    rng = np.random.default_rng(seed)
    if contained:
        if m > j:
            raise InvalidArgumentError(f"contained mode needs m <= anchor dim, got {m} > {j}")
        inner = _orthonormalize_gaussian(rng.standard_normal((j, m)))
        return Subspace(anchor.frame @ inner)
    if not (j <= m <= n):
        raise InvalidArgumentError(f"need anchor dim <= m <= n, got {j}, {m}, {n}")
    if m == j:
        return anchor
    g = rng.standard_normal((n, m - j))
    g -= anchor.frame @ (anchor.frame.T @ g)
    extra = _orthonormalize_gaussian(g)
    return Subspace(np.hstack([anchor.frame, extra]))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights summing to 1 on a (sub)sphere."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    pair_symmetric: bool = field(default=False)

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if np.any(weights <= 0):
            raise InvalidArgumentError("quadrature weights must be positive")
        weights = weights / math.fsum(weights)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.weights)


def _circle_rule(count):
    ang = 2.0 * np.pi * np.arange(count) / count
    uv = np.column_stack([np.cos(ang), np.sin(ang)])
    return uv, np.full(count, 1.0 / count)


def _unit_sphere_product_rule(m, degree):
    """Product Gauss rule on S^{m-1}, exact for polynomials of degree <= degree.

    Recursive construction: theta = (t, sqrt(1-t^2) * omega) with t drawn from
    a Gauss-Gegenbauer rule for the weight (1-t^2)^{(m-3)/2} and omega from a
    rule on S^{m-2}.
    """
    if m == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if m == 2:
        count = max(2 * (degree // 2 + 1), degree + 2)
        count += count % 2  # keep antipodal pairs
        return _circle_rule(count)
    k = degree // 2 + 1
    t, wt = roots_gegenbauer(k, (m - 2) / 2.0)
    wt = wt / wt.sum()
    sub_nodes, sub_w = _unit_sphere_product_rule(m - 1, degree)
    s = np.sqrt(np.clip(1.0 - t**2, 0.0, None))
    nodes = np.concatenate(
        [np.column_stack([np.full(len(sub_nodes), ti), si * sub_nodes]) for ti, si in zip(t, s)]
    )
    weights = np.concatenate([wi * sub_w for wi in wt])
    return nodes, weights


def _unit_sphere_mc_rule(m, count, seed):
    half = max(1, count // 2)
    u = sample_sphere_uniform(m, half, seed)
    return np.vstack([u, -u]), np.full(2 * half, 0.5 / half)


def subsphere_quadrature(E, rule_size, kind=None, seed=0):
    """Quadrature rule on S^{n-1} intersected with the subspace E.

    Kinds: "product_gauss" (exact for moderate polynomial degree; default for
    m = 2, 3), "symmetrized" antipodal Monte Carlo (default for m >= 4), and
    "monte_carlo". For m = 1 the rule is the antipodal pair.
    """
    if not isinstance(E, Subspace):
        E = Subspace(np.asarray(E))
    m = E.dim_sub
    if rule_size < 2:
        raise InvalidArgumentError(f"rule_size must be >= 2, got {rule_size}")
    if kind is None:
        kind = "product_gauss" if m <= 3 else "symmetrized"
    if m == 1:
        uv, w = np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
        pair = True
    elif kind == "product_gauss":
        degree = _degree_for_size(m, rule_size)
        uv, w = _unit_sphere_product_rule(m, degree)
        pair = True
    elif kind == "symmetrized":
        uv, w = _unit_sphere_mc_rule(m, rule_size, seed)
        pair = True
    elif kind == "monte_carlo":
        uv = sample_sphere_uniform(m, rule_size, seed)
        w = np.full(rule_size, 1.0 / rule_size)
        pair = False
    else:
        raise InvalidArgumentError(f"unknown quadrature kind {kind!r}")
    return QuadratureRule(uv @ E.frame.T, w, kind if m > 1 else "antipodal_pair", pair_symmetric=pair)


def _degree_for_size(m, rule_size):
    """Largest exactness degree whose product rule stays within rule_size nodes."""
    if m == 2:
        return max(2, rule_size - 2)
    degree = 2
    while True:
        nodes, _ = _unit_sphere_product_rule(m, degree + 2)
        if len(nodes) > rule_size:
            return degree
        degree += 2
        if degree >= 64:
            return degree


def subsphere_product_rule(E, degree):
    """Product rule on S^{n-1} cap E exact for polynomials of degree <= degree."""
    if not isinstance(E, Subspace):
        E = Subspace(np.asarray(E))
    uv, w = _unit_sphere_product_rule(E.dim_sub, degree)
    return QuadratureRule(uv @ E.frame.T, w, "product_gauss", pair_symmetric=True)


def sphere_quadrature(n, rule_size, kind=None, seed=0):
    """Quadrature on the full sphere S^{n-1}."""
    return subsphere_quadrature(Subspace(np.eye(n)), rule_size, kind=kind, seed=seed)


def _evaluate_on_nodes(f, rule):
    values = f(rule.nodes) if callable(f) else np.asarray(f, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(rule),):
        raise InvalidArgumentError(
            f"integrand produced shape {values.shape}, expected ({len(rule)},)"
        )
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericDomainError(
            f"integrand is not finite at node {i}: {np.array2string(rule.nodes[i], precision=6)}"
        )
    return values


def integrate_sphere(f, rule):
    """Quadrature integral sum_i w_i f(theta_i) against the probability measure.

    f may be a callable taking an (N, n) array of nodes, or an array of
    per-node values.
    """
    values = _evaluate_on_nodes(f, rule)
    return float(np.dot(rule.weights, values))


def integrate_sphere_with_se(f, rule):
    """Integral plus a Monte Carlo standard error (0 for deterministic rules)."""
    values = _evaluate_on_nodes(f, rule)
    estimate = float(np.dot(rule.weights, values))
    if rule.kind not in ("symmetrized", "monte_carlo"):
        return estimate, 0.0
    if rule.pair_symmetric:
        half = len(values) // 2
        samples = 0.5 * (values[:half] + values[half:])
    else:
        samples = values
    if len(samples) < 2:
        return estimate, float("inf")
    se = float(np.std(samples, ddof=1) / math.sqrt(len(samples)))
    return estimate, se


def mean_with_se(values):
    """Mean and standard error of i.i.d. Monte Carlo samples."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), float("inf")
    return float(values.mean()), float(np.std(values, ddof=1) / math.sqrt(values.size))
