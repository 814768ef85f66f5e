"""Even spherical-harmonic analysis on S^{n-1} via Gegenbauer zonal kernels.

The degree-d harmonic subspace is handled through its reproducing kernel
Z_d(s . t) = dim(H_d) * C_d(s . t) / C_d(1) under the uniform probability
measure, so nothing here requires an explicit harmonic basis for general n.
Expansions store each band as a linear combination of zonal functions
Z_d(c_k . theta) anchored at fixed center directions c_k; that representation
evaluates anywhere on the sphere and admits closed-form integrals over
subspheres (see :meth:`HarmonicExpansion.subsphere_mean`), which is what the
certificate pipeline leans on.

Analysis grids: for n <= 3 a Gauss-Legendre x trapezoid product grid (exact
hyperinterpolation); for n >= 4 a symmetrized Monte Carlo grid with a
least-squares-consistent projection onto the even bandlimited space.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedInversionError, InvalidArgumentError
from .sphere import QuadratureRule, sample_sphere_uniform, sphere_quadrature

DEFAULT_BANDLIMIT = {2: 16, 3: 16, 4: 8, 5: 8, 6: 6}
DEFAULT_MC_GRID = {4: 16000, 5: 25000, 6: 48000}
CONDITIONING_FLOOR = 1e-6
NEGLIGIBLE_BAND_SUP = 1e-9


def gegenbauer_eval(nu, d, t):
    """Gegenbauer polynomial C_d^nu(t) by the three-term recurrence.

    nu = 0 is handled as the Chebyshev case (T_d), the n = 2 limit.
    """
    if d < 0:
        raise InvalidArgumentError(f"degree must be >= 0, got {d}")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise InvalidArgumentError("argument must lie in [-1, 1]")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if nu == 0.0:
        prev, cur = np.ones_like(t), t.copy()
        for _ in range(2, d + 1):
            prev, cur = cur, 2.0 * t * cur - prev
    else:
        prev, cur = np.ones_like(t), 2.0 * nu * t
        for k in range(2, d + 1):
            prev, cur = cur, (2.0 * t * (k + nu - 1.0) * cur - (k + 2.0 * nu - 2.0) * prev) / k
    out = prev if d == 0 else cur
    return float(out[0]) if scalar else out


def zonal_value(nu, d, t):
    """Normalized Gegenbauer C_d^nu(t) / C_d^nu(1); valid for all nu >= 0."""
    t = np.asarray(t, dtype=float)
    if d == 0:
        return np.ones_like(t)
    prev, cur = np.ones_like(t), t.copy()
    for k in range(2, d + 1):
        prev, cur = cur, (2.0 * (k + nu - 1.0) * t * cur - (k - 1.0) * prev) / (2.0 * nu + k - 1.0)
    return cur


def zonal_power_coeffs(nu, d):
    """Coefficients of C_d^nu(t)/C_d^nu(1) in powers of t (length d+1)."""
    if d == 0:
        return np.array([1.0])
    prev = np.zeros(d + 1)
    prev[0] = 1.0
    cur = np.zeros(d + 1)
    cur[1] = 1.0
    for k in range(2, d + 1):
        shifted = np.zeros(d + 1)
        shifted[1:] = cur[:-1]
        prev, cur = cur, (2.0 * (k + nu - 1.0) * shifted - (k - 1.0) * prev) / (2.0 * nu + k - 1.0)
    return cur


def harmonic_dim(n, d):
    """Dimension of the space of degree-d spherical harmonics in n variables."""
    if d == 0:
        return 1
    if n == 2:
        return 2
    return (2 * d + n - 2) * math.comb(d + n - 3, d) // (n - 2)


def funk_multiplier(n, d):
    """Funk-Hecke eigenvalue of the probability-normalized spherical Radon
    transform on degree-d harmonics: C_d(0) / C_d(1) with index (n-2)/2."""
    if d % 2 != 0:
        raise InvalidArgumentError(f"odd degrees are annihilated by the Funk transform (d={d})")
    if d < 0:
        raise InvalidArgumentError(f"degree must be >= 0, got {d}")
    return float(zonal_value((n - 2) / 2.0, d, np.array(0.0)))


@dataclass(frozen=True)
class ZonalKernel:
    """Reproducing kernel of the degree-d harmonic subspace under the uniform
    probability measure: Z_d(1) equals dim(H_d)."""

    dim_ambient: int
    degree: int

    def __call__(self, t):
        nu = (self.dim_ambient - 2) / 2.0
        return harmonic_dim(self.dim_ambient, self.degree) * zonal_value(nu, self.degree, t)


def project_band(f, n, d, rule):
    """Degree-d band projection by plain zonal-kernel quadrature.

    Returns a callable theta -> (Pi_d f)(theta). Exact when the rule
    integrates degree d + deg(f) polynomials; used as the independent check
    on the least-squares expansion path.
    """
    kernel = ZonalKernel(n, d)
    fvals = f(rule.nodes) if callable(f) else np.asarray(f, dtype=float)
    weighted = rule.weights * fvals

    def component(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return kernel(points @ rule.nodes.T) @ weighted

    return component


def analysis_grid(n, bandlimit, size=None, seed=0):
    """Analysis grid for even expansions up to the given bandlimit."""
    if n == 2:
        count = size or (4 * bandlimit + 4)
        return sphere_quadrature(2, count, kind="product_gauss")
    if n == 3:
        # Gauss-Legendre x trapezoid, exact well past degree-2L products
        if size is not None:
            return sphere_quadrature(3, size, kind="product_gauss")
        return _product_grid_n3(bandlimit)
    count = size or DEFAULT_MC_GRID.get(n, 20000 + 6000 * (n - 4))
    return sphere_quadrature(n, count, kind="symmetrized", seed=seed)


def _product_grid_n3(bandlimit):
    from .sphere import subsphere_product_rule, Subspace

    return subsphere_product_rule(Subspace(np.eye(3)), 4 * bandlimit)


class EvenHarmonicBasis:
    """Numerically orthonormal basis of the even harmonics of degree <= L.

    Per band, basis functions are combinations of zonal kernels at fixed
    Haar-sampled centers, orthonormalized through the exact Gram matrix
    Z_d(c_j . c_k) (the reproducing property makes those inner products
    closed-form). The basis is orthonormal in L2 of the uniform probability
    measure up to roundoff, independent of the analysis grid.
    """

    def __init__(self, n, bandlimit, grid=None, seed=202, center_margin=1.7):
        if bandlimit % 2 != 0:
            raise InvalidArgumentError("bandlimit must be even")
        self.n = n
        self.bandlimit = bandlimit
        self.nu = (n - 2) / 2.0
        self.grid = grid if grid is not None else analysis_grid(n, bandlimit)
        self.degrees = list(range(0, bandlimit + 1, 2))
        self.centers = {}
        self.mix = {}  # mix[d]: (M_d, N_d) map from basis coords to zonal coeffs
        rng_salt = 0
        for d in self.degrees[1:]:
            nd = harmonic_dim(n, d)
            m = int(center_margin * nd) + 8
            c = sample_sphere_uniform(n, m, [seed, d, rng_salt])
            gram = nd * zonal_value(self.nu, d, c @ c.T)
            lam, vec = np.linalg.eigh(gram)
            lam, vec = lam[::-1][:nd], vec[:, ::-1][:, :nd]
            if lam[-1] <= 1e-8 * lam[0]:
                raise InvalidArgumentError(
                    f"degenerate center set for degree {d}; increase center_margin"
                )
            self.centers[d] = c
            self.mix[d] = vec / np.sqrt(lam)
        self._design = self._evaluate_design(self.grid.nodes)
        w = self.grid.weights
        self._normal = (self._design * w[:, None]).T @ self._design
        self._chol = np.linalg.cholesky(self._normal)
        self._slices = {}
        offset = 0
        for d in self.degrees:
            nd = harmonic_dim(n, d)
            self._slices[d] = slice(offset, offset + nd)
            offset += nd
        self.total_dim = offset

    def _evaluate_design(self, points):
        cols = [np.ones((len(points), 1))]
        for d in self.degrees[1:]:
            z = harmonic_dim(self.n, d) * zonal_value(self.nu, d, points @ self.centers[d].T)
            cols.append(z @ self.mix[d])
        return np.hstack(cols)

    def expand_values(self, values):
        """Least-squares coefficients of grid values in this basis."""
        rhs = (self._design * self.grid.weights[:, None]).T @ np.asarray(values, dtype=float)
        y = np.linalg.solve(self._chol, rhs)
        return np.linalg.solve(self._chol.T, y)

    def coefficients_to_bands(self, coeffs):
        """Split a coefficient vector into per-band zonal-center coefficients."""
        bands = {}
        for d in self.degrees:
            yd = coeffs[self._slices[d]]
            if d == 0:
                bands[0] = np.array([float(yd[0])])
            else:
                bands[d] = self.mix[d] @ yd
        return bands

    def fitted_values(self, coeffs):
        return self._design @ coeffs


_BASIS_CACHE = {}


def get_basis(n, bandlimit, grid_size=None, seed=202):
    """Shared, cached basis per (n, bandlimit, grid size, seed)."""
    key = (n, bandlimit, grid_size, seed)
    if key not in _BASIS_CACHE:
        grid = analysis_grid(n, bandlimit, size=grid_size)
        _BASIS_CACHE[key] = EvenHarmonicBasis(n, bandlimit, grid=grid, seed=seed)
    return _BASIS_CACHE[key]


def _sphere_moment(m, p):
    """Mean of omega_1^p over S^{m-1} for even p: (p-1)!! / (m(m+2)...(m+p-2))."""
    if p == 0:
        return 1.0
    num = 1.0
    for i in range(1, p, 2):
        num *= i
    den = 1.0
    for i in range(p // 2):
        den *= m + 2 * i
    return num / den


class HarmonicExpansion:
    """Truncated even expansion sum_d comp_d with comp_d in the degree-d band.

    Each band is stored both as values on the analysis grid and as a vector of
    zonal-center coefficients comp_d = sum_k x_k Z_d(c_k . theta); the latter
    is what evaluates off-grid and integrates in closed form over subspheres.
    """

    def __init__(self, dim, bandlimit, bands, centers, residual, grid=None, grid_values=None):
        self.dim = dim
        self.bandlimit = bandlimit
        self.bands = bands          # {d: zonal coefficient vector (d=0: [c])}
        self.centers = centers      # {d: (M_d, n) center directions}, no entry for 0
        self.residual = float(residual)
        self.grid = grid
        self.grid_values = grid_values  # {d: band values on grid nodes}
        self.nu = (dim - 2) / 2.0

    @property
    def degrees(self):
        return sorted(self.bands)

    def band_eval(self, d, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if d == 0:
            return np.full(len(points), self.bands[0][0])
        z = harmonic_dim(self.dim, d) * zonal_value(self.nu, d, points @ self.centers[d].T)
        return z @ self.bands[d]

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(points))
        for d in self.degrees:
            out += self.band_eval(d, points)
        return out

    def band_sup(self, d):
        if self.grid_values is not None and d in self.grid_values:
            return float(np.abs(self.grid_values[d]).max())
        probe = sample_sphere_uniform(self.dim, 512, [7, d])
        return float(np.abs(self.band_eval(d, probe)).max())

    def sup_norm(self):
        if self.grid is not None:
            total = np.zeros(len(self.grid.nodes))
            for d in self.degrees:
                total += self.grid_values[d] if self.grid_values else self.band_eval(d, self.grid.nodes)
            return float(np.abs(total).max())
        probe = sample_sphere_uniform(self.dim, 4096, 13)
        return float(np.abs(self(probe)).max())

    def scale_bands(self, factors):
        """New expansion with band d multiplied by factors[d] (missing: zeroed)."""
        bands, values = {}, None
        if self.grid_values is not None:
            values = {}
        for d in self.degrees:
            c = factors.get(d, 0.0)
            bands[d] = self.bands[d] * c
            if values is not None:
                values[d] = self.grid_values[d] * c
        return HarmonicExpansion(
            self.dim, self.bandlimit, bands, self.centers, self.residual,
            grid=self.grid, grid_values=values,
        )

    def subsphere_mean(self, frames):
        """Closed-form mean of this expansion over S^{n-1} cap span(frame).

        frames: (B, n, m) batch of orthonormal frames (or a single (n, m)
        frame). Uses the exact moments of uniform measure on S^{m-1}, so the
        result carries no quadrature error.
        """
        frames = np.asarray(frames, dtype=float)
        single = frames.ndim == 2
        if single:
            frames = frames[None]
        m = frames.shape[2]
        out = np.full(len(frames), self.bands[0][0] if 0 in self.bands else 0.0)
        for d in self.degrees:
            if d == 0:
                continue
            proj = np.einsum("kn,bnm->bkm", self.centers[d], frames)
            r2 = np.einsum("bkm,bkm->bk", proj, proj)
            coeffs = zonal_power_coeffs(self.nu, d)
            poly = np.zeros_like(r2)
            rp = None
            for p in range(d % 2, d + 1, 2):
                rp = r2 ** (p // 2) if p else np.ones_like(r2)
                if coeffs[p] != 0.0:
                    poly += coeffs[p] * _sphere_moment(m, p) * rp
            out += harmonic_dim(self.dim, d) * (poly @ self.bands[d])
        return float(out[0]) if single else out

    def to_payload(self):
        """JSON-ready representation (self-contained: centers + coefficients)."""
        bands = {}
        for d in self.degrees:
            entry = {"coeffs": self.bands[d].tolist()}
            if d != 0:
                entry["centers"] = self.centers[d].tolist()
            bands[str(d)] = entry
        return {
            "dim": self.dim,
            "bandlimit": self.bandlimit,
            "residual": self.residual,
            "bands": bands,
        }

    @classmethod
    def from_payload(cls, payload):
        bands, centers = {}, {}
        for key, entry in payload["bands"].items():
            d = int(key)
            bands[d] = np.asarray(entry["coeffs"], dtype=float)
            if d != 0:
                centers[d] = np.asarray(entry["centers"], dtype=float)
        return cls(
            int(payload["dim"]), int(payload["bandlimit"]), bands, centers,
            float(payload.get("residual", float("nan"))),
        )


def expand(f, n, bandlimit, basis=None, grid_size=None):
    """Band-by-band even expansion of a sphere function up to the bandlimit.

    Returns a HarmonicExpansion whose residual field is the sup-norm of
    f - sum_d Pi_d f on the analysis grid.
    """
    if basis is None:
        basis = get_basis(n, bandlimit, grid_size=grid_size)
    grid = basis.grid
    values = f(grid.nodes) if callable(f) else np.asarray(f, dtype=float)
    coeffs = basis.expand_values(values)
    residual = float(np.abs(values - basis.fitted_values(coeffs)).max())
    bands = basis.coefficients_to_bands(coeffs)
    grid_values = {}
    for d in basis.degrees:
        block = basis._design[:, basis._slices[d]]
        grid_values[d] = block @ coeffs[basis._slices[d]]
    return HarmonicExpansion(
        n, bandlimit, bands, dict(basis.centers), residual,
        grid=grid, grid_values=grid_values,
    )


def funk_transform(expansion):
    """Spherical Radon transform of an expansion: band d scaled by lambda_{n,d}."""
    factors = {d: funk_multiplier(expansion.dim, d) for d in expansion.degrees}
    return expansion.scale_bands(factors)


def funk_inverse(expansion, floor=CONDITIONING_FLOOR, zero_tol=NEGLIGIBLE_BAND_SUP):
    """Spectral inverse of the Funk transform: band d divided by lambda_{n,d}.

    A band whose multiplier falls below the conditioning floor is zeroed if
    its sup-norm is below zero_tol, and raises otherwise.
    """
    factors = {}
    for d in expansion.degrees:
        lam = funk_multiplier(expansion.dim, d)
        if abs(lam) < floor:
            band_sup = expansion.band_sup(d)
            if band_sup <= zero_tol:
                factors[d] = 0.0
                continue
            raise IllConditionedInversionError(d, lam, band_sup)
        factors[d] = 1.0 / lam
    return expansion.scale_bands(factors)
