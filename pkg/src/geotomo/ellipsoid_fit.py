"""Approximate a radial function by finite sums of ellipsoid radial powers.

The fit target is rho_K itself: minimize the grid least-squares misfit of
sum_j rho_{E_j}^k against rho_K with k = n - a (raw-power mode). Each term is
parameterized by a lower-triangular factor G with log-parameterized positive
diagonal, so A = G G' stays symmetric positive definite throughout. Local
search is damped Gauss-Newton (Levenberg-Marquardt) with seeded random
restarts; the nonconvexity and term-permutation symmetry make restarts the
honest mitigation.
"""

from dataclasses import dataclass, field

import numpy as np

from .bodies import Ellipsoid, PowerBody, RadialSumBody
from .errors import InvalidArgumentError
from .sphere import sample_sphere_uniform

DEFAULT_GRID_SIZE = {2: 400, 3: 500, 4: 2000, 5: 5000, 6: 8000}


@dataclass
class FitConfig:
    max_iters: int = 150
    restarts: int = 8
    seed: int = 0
    mu0: float = 1e-3
    mu_inc: float = 4.0
    mu_dec: float = 3.0
    gtol: float = 1e-12
    ftol: float = 1e-15
    step_tol: float = 1e-14
    eig_floor: float = 1e-8
    init_spread: float = 0.25

    def to_dict(self):
        return {
            "max_iters": self.max_iters,
            "restarts": self.restarts,
            "seed": self.seed,
            "mu0": self.mu0,
            "mu_inc": self.mu_inc,
            "mu_dec": self.mu_dec,
            "gtol": self.gtol,
            "ftol": self.ftol,
            "step_tol": self.step_tol,
            "eig_floor": self.eig_floor,
            "init_spread": self.init_spread,
        }


@dataclass
class EllipsoidSum:
    """rho(theta) = (sum_j rho_{E_j}^k)^{1/k} as a k-radial sum, or in raw-power
    mode the function sum_j rho_{E_j}^k itself (the fit target)."""

    k_exponent: float
    matrices: list

    def __post_init__(self):
        if not self.matrices:
            raise InvalidArgumentError("ellipsoid sum needs at least one term")
        self.matrices = [np.asarray(m, dtype=float) for m in self.matrices]

    @property
    def dim(self):
        return self.matrices[0].shape[0]

    def raw_power_values(self, points):
        points = np.atleast_2d(points)
        acc = np.zeros(len(points))
        for a in self.matrices:
            q = np.einsum("ij,jk,ik->i", points, a, points)
            acc += q ** (-self.k_exponent / 2.0)
        return acc

    def terms(self):
        return [Ellipsoid(a) for a in self.matrices]

    def as_radial_sum_body(self):
        return RadialSumBody(self.terms(), self.k_exponent)

    def as_raw_power_body(self):
        """Star body whose radial function equals sum_j rho_{E_j}^k."""
        return PowerBody(self.as_radial_sum_body(), self.k_exponent)

    def to_payload(self):
        return {
            "k_exponent": self.k_exponent,
            "matrices": [m.tolist() for m in self.matrices],
            "body_descriptor": self.as_raw_power_body().descriptor(),
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(float(payload["k_exponent"]), [np.asarray(m) for m in payload["matrices"]])


def _tril_indices(n):
    return np.tril_indices(n)


def _pack(gs):
    """Pack a list of lower-triangular factors into a parameter vector."""
    n = gs[0].shape[0]
    rows, cols = _tril_indices(n)
    out = []
    for g in gs:
        vals = g[rows, cols].copy()
        diag_pos = rows == cols
        vals[diag_pos] = np.log(np.diag(g))
        out.append(vals)
    return np.concatenate(out)


def _unpack(params, n, num_terms):
    rows, cols = _tril_indices(n)
    per = len(rows)
    gs = []
    for j in range(num_terms):
        vals = params[j * per : (j + 1) * per]
        g = np.zeros((n, n))
        g[rows, cols] = vals
        np.fill_diagonal(g, np.exp(np.diag(g)))
        gs.append(g)
    return gs


def _model_and_jacobian(params, points, k, n, num_terms, want_jacobian=True):
    rows, cols = _tril_indices(n)
    per = len(rows)
    gs = _unpack(params, n, num_terms)
    npts = len(points)
    model = np.zeros(npts)
    jac = np.empty((npts, per * num_terms)) if want_jacobian else None
    for j, g in enumerate(gs):
        t = points @ g  # row i is G' theta_i
        s = np.einsum("ij,ij->i", t, t)
        powv = s ** (-k / 2.0)
        model += powv
        if want_jacobian:
            coef = -k * s ** (-(k + 2.0) / 2.0)
            block = coef[:, None] * points[:, rows] * t[:, cols]
            diag_pos = rows == cols
            block[:, diag_pos] *= np.diag(g)[None, :]
            jac[:, j * per : (j + 1) * per] = block
    return model, jac


def _min_singular_sq(g):
    return float(np.linalg.svd(g, compute_uv=False)[-1] ** 2)


def _enforce_floor(params, n, num_terms, floor):
    """Project factors so every A = G G' keeps eigenvalues >= floor."""
    gs = _unpack(params, n, num_terms)
    changed = False
    for j, g in enumerate(gs):
        if _min_singular_sq(g) < floor:
            a = g @ g.T + (floor - _min_singular_sq(g) + 1e-15) * np.eye(n)
            gs[j] = np.linalg.cholesky(a)
            changed = True
    return (_pack(gs), True) if changed else (params, False)


def _levenberg_marquardt(params0, target, points, k, n, num_terms, cfg):
    params = params0.copy()
    model, jac = _model_and_jacobian(params, points, k, n, num_terms)
    resid = model - target
    obj = float(resid @ resid)
    trace = [obj]
    mu = cfg.mu0
    for _ in range(cfg.max_iters):
        grad = jac.T @ resid
        if np.linalg.norm(grad) <= cfg.gtol * max(1.0, obj):
            break
        jtj = jac.T @ jac
        damping = np.diag(np.maximum(np.diag(jtj), 1e-12))
        accepted = False
        for _try in range(25):
            try:
                step = np.linalg.solve(jtj + mu * damping, -grad)
            except np.linalg.LinAlgError:
                mu *= cfg.mu_inc
                continue
            cand = params + step
            cand, _ = _enforce_floor(cand, n, num_terms, cfg.eig_floor)
            cand_model, cand_jac = _model_and_jacobian(cand, points, k, n, num_terms)
            cand_resid = cand_model - target
            cand_obj = float(cand_resid @ cand_resid)
            if cand_obj < obj:
                params, model, jac, resid = cand, cand_model, cand_jac, cand_resid
                improvement = obj - cand_obj
                obj = cand_obj
                trace.append(obj)
                mu = max(mu / cfg.mu_dec, 1e-14)
                accepted = True
                if improvement <= cfg.ftol * max(obj, 1e-300) or np.linalg.norm(step) <= cfg.step_tol:
                    return params, obj, trace, True
                break
            mu *= cfg.mu_inc
        if not accepted:
            break
    return params, obj, trace, len(trace) > 1


def _initial_factors(rho_mean, k, n, num_terms, rng, spread):
    """Seed factors so the initial model is on the right scale."""
    per_term_rho = max((rho_mean / num_terms) ** (1.0 / k), 1e-3)
    gs = []
    for _ in range(num_terms):
        base = np.eye(n) / per_term_rho
        noise = spread * rng.standard_normal((n, n)) / per_term_rho
        a = base @ base.T + noise @ noise.T
        scale = 1.0 + spread * rng.uniform(-0.5, 0.5)
        gs.append(np.linalg.cholesky(scale * a))
    return gs


def fit_ellipsoid_sum(body, a, num_terms, grid=None, config=None, warm_start=None):
    """Least-squares fit of sum_j rho_{E_j}^{n-a} to rho_K on a sphere grid.

    Returns (EllipsoidSum, report). The report carries the best objective,
    the grid radial-metric distance d_r, the objective trace of the winning
    restart, and a convergence flag. warm_start (an EllipsoidSum with
    num_terms terms) is evaluated as an extra candidate, both as-is and
    after local optimization.
    """
    config = config or FitConfig()
    if num_terms < 1:
        raise InvalidArgumentError("num_terms must be >= 1")
    n = body.dim
    k = float(n - a)
    if k < 1:
        raise InvalidArgumentError(f"exponent n - a must be >= 1, got {k}")
    if grid is None:
        half = DEFAULT_GRID_SIZE.get(n, 4000) // 2
        pts = sample_sphere_uniform(n, half, [config.seed, 101])
        grid = np.vstack([pts, -pts])
    target = body.rho(grid)
    if np.any(target <= 0):
        raise InvalidArgumentError("body radial function must be positive on the grid")
    rho_mean = float(target.mean())

    candidates = []
    if warm_start is not None:
        if len(warm_start.matrices) != num_terms:
            raise InvalidArgumentError("warm start must carry num_terms terms")
        params0 = _pack([np.linalg.cholesky(m) for m in warm_start.matrices])
        model0, _ = _model_and_jacobian(params0, grid, k, n, num_terms, want_jacobian=False)
        obj0 = float(((model0 - target) ** 2).sum())
        candidates.append((params0, obj0, [obj0], True, "warm_start_unoptimized"))
        params, obj, trace, moved = _levenberg_marquardt(
            params0, target, grid, k, n, num_terms, config
        )
        candidates.append((params, obj, trace, moved, "warm_start_optimized"))
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, 77, r])
        gs = _initial_factors(rho_mean, k, n, num_terms, rng, config.init_spread)
        params0 = _pack(gs)
        params, obj, trace, moved = _levenberg_marquardt(
            params0, target, grid, k, n, num_terms, config
        )
        candidates.append((params, obj, trace, moved, f"restart_{r}"))

    candidates.sort(key=lambda c: c[1])
    best_params, best_obj, best_trace, moved, origin = candidates[0]
    gs = _unpack(best_params, n, num_terms)
    result = EllipsoidSum(k, [g @ g.T for g in gs])
    model, _ = _model_and_jacobian(best_params, grid, k, n, num_terms, want_jacobian=False)
    d_r = float(np.abs(model - target).max())
    converged = any(len(c[2]) > 1 and c[2][-1] < c[2][0] for c in candidates) or best_obj <= 1e-18
    report = {
        "objective": best_obj,
        "d_r": d_r,
        "objective_trace": best_trace,
        "converged": bool(converged),
        "origin": origin,
        "num_terms": num_terms,
        "k_exponent": k,
        "grid_size": int(len(grid)),
        "config": config.to_dict(),
    }
    if not converged:
        report["warning"] = "no restart achieved a decreasing objective"
    return result, report


def fit_error_curve(body, a, max_terms, grid=None, config=None):
    """Best-of-restarts fit error for term counts 1..max_terms.

    Each count is warm-started from the previous solution plus one negligible
    extra term, which (together with keeping the unoptimized warm candidate)
    makes the reported error non-increasing in num_terms.
    """
    config = config or FitConfig()
    if max_terms < 1:
        raise InvalidArgumentError("max_terms must be >= 1")
    n = body.dim
    if grid is None:
        half = DEFAULT_GRID_SIZE.get(n, 4000) // 2
        pts = sample_sphere_uniform(n, half, [config.seed, 101])
        grid = np.vstack([pts, -pts])
    curve = []
    previous = None
    for count in range(1, max_terms + 1):
        warm = None
        if previous is not None:
            # a term with tiny radial contribution: A huge => rho ~ 1e-9
            tiny = (1e9**2) * np.eye(n)
            warm = EllipsoidSum(previous.k_exponent, list(previous.matrices) + [tiny])
        fit, report = fit_ellipsoid_sum(
            body, a, count, grid=grid, config=config, warm_start=warm
        )
        curve.append({"num_terms": count, "d_r": report["d_r"], "objective": report["objective"]})
        previous = fit
    return curve


def gradient_check(body, a, num_terms, grid=None, config=None, probes=10, eps=1e-6, seed=5):
    """Compare the analytic misfit gradient against central finite differences.

    Returns the worst relative mismatch over `probes` random parameter points.
    """
    config = config or FitConfig()
    n = body.dim
    k = float(n - a)
    if grid is None:
        pts = sample_sphere_uniform(n, 250, [seed, 103])
        grid = np.vstack([pts, -pts])
    target = body.rho(grid)
    rows, _ = _tril_indices(n)
    per = len(rows)
    worst = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        gs = _initial_factors(float(target.mean()), k, n, num_terms, rng, 0.3)
        params = _pack(gs)
        model, jac = _model_and_jacobian(params, grid, k, n, num_terms)
        grad = 2.0 * jac.T @ (model - target)
        fd = np.empty_like(grad)
        for idx in range(per * num_terms):
            shift = np.zeros_like(params)
            shift[idx] = eps
            up, _ = _model_and_jacobian(params + shift, grid, k, n, num_terms, want_jacobian=False)
            dn, _ = _model_and_jacobian(params - shift, grid, k, n, num_terms, want_jacobian=False)
            fd[idx] = (float(((up - target) ** 2).sum()) - float(((dn - target) ** 2).sum())) / (
                2 * eps
            )
        scale = max(np.abs(grad).max(), np.abs(fd).max(), 1e-12)
        worst = max(worst, float(np.abs(grad - fd).max() / scale))
    return worst
