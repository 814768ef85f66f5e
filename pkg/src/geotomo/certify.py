"""Busemann-Petty certificates for radial-power bodies.

The pipeline follows the constructive proof: invert the spherical Radon
transform on rho_K, integrate the inverse u over spheres of (n-3)-dimensional
subspaces to obtain a density g on G(n, 3) (and, for codimension n-2, an
inner average h on G(n, 2)), check that the sampled density is nonnegative,
and verify that the dual Radon transform of the density reconstructs rho_K.
A certified run witnesses numerically that the body with radial function
rho_K^{1/(n-a)} belongs to the (n-a)-Busemann-Petty class.

Sampling notes. Individual g-values use the closed-form subsphere means of
the bandlimited surrogate, so they carry no quadrature noise; Monte Carlo
enters only through subspace choice. Reconstruction uses a balanced design:
each draw is a Haar orthonormal basis of theta-perp whose column subsets
supply a group of subspaces covering every basis direction equally, which
cancels the degree-2 variance of the integrand exactly. Group means are
i.i.d. and unbiased, so the reported standard errors stay honest.
"""

import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .bodies import volume, section_volume
from .errors import (
    BandlimitInsufficientError,
    IllConditionedInversionError,
    InvalidArgumentError,
)
from .harmonics import DEFAULT_BANDLIMIT, expand, funk_inverse, get_basis
from .sphere import (
    Subspace,
    hyperplane_orthogonal_to,
    integrate_sphere_with_se,
    mean_with_se,
    sample_grassmann_haar,
    sample_sphere_uniform,
    sphere_quadrature,
    subsphere_quadrature,
)

CERTIFY_RESIDUAL_TOL = 2e-2  # relative; looser than the funk-op gate on purpose


def _batched_haar_frames(n, m, count, seed):
    """Haar (n, m)-frames, shape (count, n, m), via batched QR with sign fix."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n, m))
    q, r = np.linalg.qr(g)
    diag = np.einsum("bii->bi", r)
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs[:, None, :]


def _batched_bases_within(basis, count, seed):
    """Haar orthonormal bases of span(basis): shape (count, n, q)."""
    q = basis.shape[1]
    rotations = _batched_haar_frames(q, q, count, seed)
    return np.einsum("nq,bqr->bnr", basis, rotations)


def _subset_columns(q, m):
    return list(combinations(range(q), m))


@dataclass
class CertifyConfig:
    bandlimit: int = None
    n_g: int = 2000
    n_rec: int = 200
    n_rec_groups: int = 16
    n_h_inner: int = 4  # inner basis rotations per h-value
    pos_tol: float = 1e-3
    rec_tol_rel: float = 1e-2
    se_mult: float = 3.0
    resid_tol: float = CERTIFY_RESIDUAL_TOL
    seed: int = 0
    strict_positivity: bool = False
    check_convexity: bool = False

    def resolved_bandlimit(self, dim):
        return self.bandlimit if self.bandlimit is not None else DEFAULT_BANDLIMIT[dim]

    def to_dict(self):
        return {
            "bandlimit": self.bandlimit,
            "n_g": self.n_g,
            "n_rec": self.n_rec,
            "n_rec_groups": self.n_rec_groups,
            "n_h_inner": self.n_h_inner,
            "pos_tol": self.pos_tol,
            "rec_tol_rel": self.rec_tol_rel,
            "se_mult": self.se_mult,
            "resid_tol": self.resid_tol,
            "seed": self.seed,
            "strict_positivity": self.strict_positivity,
            "check_convexity": self.check_convexity,
        }


@dataclass
class Certificate:
    body: dict
    dim: int
    a: int
    bandlimit: int
    verdict: str
    residual: float = float("nan")
    residual_relative: float = float("nan")
    u_sup: float = float("nan")
    g_stats: dict = None
    h_stats: dict = None
    reconstruction: dict = None
    tolerances: dict = None
    attestation: str = "caller"
    diagnostics: dict = field(default_factory=dict)
    config: dict = None
    wall_time_s: float = 0.0

    def to_dict(self):
        return {
            "body": self.body,
            "dim": self.dim,
            "a": self.a,
            "bandlimit": self.bandlimit,
            "verdict": self.verdict,
            "residual": self.residual,
            "residual_relative": self.residual_relative,
            "u_sup": self.u_sup,
            "g_stats": self.g_stats,
            "h_stats": self.h_stats,
            "reconstruction": self.reconstruction,
            "tolerances": self.tolerances,
            "attestation": self.attestation,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }


def _body_descriptor(body):
    try:
        return body.descriptor()
    except InvalidArgumentError:
        return {"dim": body.dim, "type": "opaque", "repr": repr(body)}


def g_density(u, description="g = integral of R^{-1}(rho_K) over S^{n-1} cap F-perp"):
    """The density g on G(n, 3) induced by u = R^{-1}(rho_K).

    g(F) integrates u over the unit sphere of the orthogonal complement of F,
    in closed form for the bandlimited u.
    """
    from .radon import GrassmannDensity

    def generator(sub):
        if sub.dim_sub != 3:
            raise InvalidArgumentError("g is a density on G(n, 3)")
        perp = sub.orthogonal_complement()
        return u.subsphere_mean(perp.frame)

    return GrassmannDensity(u.dim, 3, generator=generator, description=description)


def h_density(u, n_inner=4, seed=0, description="h = mean of g over 3-subspaces containing J"):
    """The density h on G(n, 2): inner Monte Carlo average of g over G_J(n, 3).

    For n = 3 the fiber G_J(3, 3) is a single point and h collapses to the
    closed-form mean of u over the antipodal pair orthogonal to J. Inner
    sampling is seeded by call order (reproducible per call sequence).
    """
    from .radon import GrassmannDensity

    calls = [0]

    def generator(sub):
        if sub.dim_sub != 2:
            raise InvalidArgumentError("h is a density on G(n, 2)")
        calls[0] += 1
        value, _ = _h_value(u, sub.frame, n_inner, [seed, 9001, calls[0]])
        return value

    return GrassmannDensity(u.dim, 2, generator=generator, description=description)


def _h_value(u, j_frame, n_inner, seed):
    """h(J) and its standard error for a single 2-frame J.

    For n >= 4: balanced inner sampling over Haar bases of J-perp; every
    (n-3)-subset of each basis serves as an F-perp. For n = 3 the value is
    the exact antipodal mean of u over J-perp.
    """
    n = u.dim
    if n == 3:
        perp = Subspace(j_frame).orthogonal_complement()
        return float(u.subsphere_mean(perp.frame)), 0.0
    basis = Subspace(j_frame).orthogonal_complement().frame  # (n, n-2)
    values, ses = _h_values_batch(u, basis[None], n_inner, seed)
    return float(values[0]), float(ses[0])


def _h_values_batch(u, j_perp_bases, n_inner, seed):
    """h-values for a batch of J's given orthonormal bases of each J-perp.

    j_perp_bases: (B, n, n-2). Per J, n_inner Haar rotations of the basis
    are drawn and every (n-3)-column subset integrates u; subset means are
    balanced, rotation means supply the per-value standard error.
    """
    B, n, q2 = j_perp_bases.shape
    rot = _batched_haar_frames(q2, q2, B * n_inner, seed).reshape(B, n_inner, q2, q2)
    bases = np.einsum("bnq,biqr->binr", j_perp_bases, rot)  # (B, n_inner, n, q2)
    subsets = _subset_columns(q2, n - 3)
    frames = np.stack([bases[:, :, :, s] for s in subsets], axis=2)
    frames = frames.reshape(B * n_inner * len(subsets), n, n - 3)
    values = u.subsphere_mean(frames).reshape(B, n_inner, len(subsets))
    rotation_means = values.mean(axis=2)  # (B, n_inner)
    h_vals = rotation_means.mean(axis=1)
    if n_inner >= 2:
        h_ses = rotation_means.std(axis=1, ddof=1) / np.sqrt(n_inner)
    else:
        h_ses = np.zeros(B)
    return h_vals, h_ses


def whole_point_check(body, subspace, bandlimit=None, rule_size=None, resid_tol=CERTIFY_RESIDUAL_TOL):
    """Integral of R^{-1}(rho_K) over S^{n-1} cap E for E in G(n, n-3).

    The constructive proof asserts this is >= 0 for smooth convex bodies.
    Returns (value, standard_error); the error is zero on the default
    closed-form path and reflects sampling when an explicit rule_size forces
    the quadrature path.
    """
    n = body.dim
    if n < 4:
        raise InvalidArgumentError("whole-point check needs ambient dimension >= 4")
    if not isinstance(subspace, Subspace):
        subspace = Subspace(np.asarray(subspace))
    if subspace.dim_sub != n - 3:
        raise InvalidArgumentError(f"subspace must have dimension n-3 = {n - 3}")
    L = bandlimit if bandlimit is not None else DEFAULT_BANDLIMIT[n]
    u = _invert_radial(body, L, resid_tol)
    if rule_size is None:
        return float(u.subsphere_mean(subspace.frame)), 0.0
    rule = subsphere_quadrature(subspace, rule_size)
    return integrate_sphere_with_se(lambda p: u(p), rule)


def _invert_radial(body, bandlimit, resid_tol):
    basis = get_basis(body.dim, bandlimit)
    expansion = expand(body.rho, body.dim, bandlimit, basis=basis)
    sup = float(np.abs(body.rho(basis.grid.nodes)).max())
    if expansion.residual > resid_tol * sup:
        raise BandlimitInsufficientError(expansion.residual, resid_tol * sup, bandlimit)
    return funk_inverse(expansion)


def _reconstruction_estimate(u, theta, a, n_groups, n_h_inner, seed):
    """Balanced estimate of R_m^*(density)(theta) with its standard error.

    a = 3: groups are Haar bases of theta-perp; every (n-3)-subset of the
    basis columns is an F-perp for some F containing theta.
    a = 2: each basis column b gives J = span(theta, b); h(J) is estimated
    by balanced inner sampling; the group averages the q column values.
    """
    n = u.dim
    hyper = hyperplane_orthogonal_to(theta).frame  # (n, n-1)
    q = n - 1
    bases = _batched_bases_within(hyper, n_groups, seed)
    if a == 3:
        subsets = _subset_columns(q, n - 3)
        frames = np.concatenate([bases[:, :, s] for s in subsets], axis=0)
        values = u.subsphere_mean(frames).reshape(len(subsets), n_groups)
        group_means = values.mean(axis=0)
        return mean_with_se(group_means)
    # a = 2: for column c of a basis of theta-perp, J = span(theta, b_c) and
    # the remaining columns are an orthonormal basis of J-perp already
    drop = [[c2 for c2 in range(q) if c2 != c] for c in range(q)]
    j_perp = np.stack([bases[:, :, d] for d in drop], axis=1)  # (groups, q, n, q-1)
    j_perp = j_perp.reshape(n_groups * q, n, q - 1)
    h_vals, _ = _h_values_batch(u, j_perp, n_h_inner, [seed, 3301])
    group_means = h_vals.reshape(n_groups, q).mean(axis=1)
    return mean_with_se(group_means)


def certify_low_codim(body, a, config=None):
    """Construct and check the (n-a)-Busemann-Petty certificate for a in {2, 3}.

    Runs the full pipeline u -> g (-> h for a = 2) -> positivity sampling ->
    dual-transform reconstruction of rho_K. Bandlimit or conditioning
    problems yield verdict "inconclusive" (never a spurious "failed").
    """
    config = config or CertifyConfig()
    n = body.dim
    if a not in (2, 3):
        raise InvalidArgumentError("a must be 2 or 3")
    if a == 3 and n < 4:
        raise InvalidArgumentError("a = 3 requires ambient dimension >= 4")
    if a == 2 and n < 3:
        raise InvalidArgumentError("a = 2 requires ambient dimension >= 3")
    t0 = time.perf_counter()
    L = config.resolved_bandlimit(n)
    cert = Certificate(
        body=_body_descriptor(body),
        dim=n,
        a=a,
        bandlimit=L,
        verdict="inconclusive",
        tolerances={
            "pos_tol": config.pos_tol,
            "rec_tol_rel": config.rec_tol_rel,
            "se_mult": config.se_mult,
            "resid_tol": config.resid_tol,
        },
        config=config.to_dict(),
    )
    if config.check_convexity:
        from .convexity import midpoint_convexity_check

        report = midpoint_convexity_check(body, n_pairs=2000, seed=config.seed)
        cert.attestation = f"midpoint_check:{report.verdict}"
        if report.verdict == "nonconvex_witness":
            cert.diagnostics["convexity"] = "midpoint check found a nonconvex witness"
            cert.wall_time_s = time.perf_counter() - t0
            return cert
    else:
        cert.attestation = "caller"

    basis = get_basis(n, L)
    rho_sup = float(np.abs(body.rho(basis.grid.nodes)).max())
    try:
        expansion = expand(body.rho, n, L, basis=basis)
        cert.residual = expansion.residual
        cert.residual_relative = expansion.residual / rho_sup
        if expansion.residual > config.resid_tol * rho_sup:
            raise BandlimitInsufficientError(
                expansion.residual, config.resid_tol * rho_sup, L
            )
        u = funk_inverse(expansion)
    except (BandlimitInsufficientError, IllConditionedInversionError) as err:
        cert.diagnostics["inversion"] = str(err)
        cert.wall_time_s = time.perf_counter() - t0
        return cert

    cert.u_sup = u.sup_norm()

    # positivity of g over Haar F in G(n, 3): F-perp is Haar in G(n, n-3)
    g_frames = _batched_haar_frames(n, n - 3, config.n_g, [config.seed, 1])
    g_vals = u.subsphere_mean(g_frames)
    g_scale = float(np.abs(g_vals).max())
    mean, se = mean_with_se(g_vals)
    cert.g_stats = {
        "min": float(g_vals.min()),
        "max": float(g_vals.max()),
        "mean": mean,
        "se_mean": se,
        "count": int(config.n_g),
        "value_se": 0.0,  # closed-form subsphere means carry no quadrature noise
    }
    pos_threshold = -config.pos_tol * g_scale
    if config.strict_positivity:
        pos_threshold = -1e-12 * g_scale
    positivity_ok = g_vals.min() >= pos_threshold

    # for a = 2, additionally sample h over Haar J in G(n, 2); one batched
    # complete QR yields both the Haar J-frames and their complements
    if a == 2:
        full = _batched_haar_frames(n, n, config.n_g, [config.seed, 2])
        if n == 3:
            h_vals = u.subsphere_mean(full[:, :, 2:])
            h_ses = np.zeros(config.n_g)
        else:
            h_vals, h_ses = _h_values_batch(
                u, full[:, :, 2:], config.n_h_inner, [config.seed, 3]
            )
        h_scale = float(np.abs(h_vals).max())
        mean, se = mean_with_se(h_vals)
        cert.h_stats = {
            "min": float(h_vals.min()),
            "max": float(h_vals.max()),
            "mean": mean,
            "se_mean": se,
            "count": int(config.n_g),
            "value_se": float(np.nan_to_num(h_ses, posinf=0.0).mean()),
        }
        h_floor = float(np.nan_to_num(h_ses, posinf=0.0).max())
        h_threshold = -config.pos_tol * h_scale - config.se_mult * h_floor
        if config.strict_positivity:
            h_threshold = -config.se_mult * h_floor - 1e-12 * h_scale
        positivity_ok = positivity_ok and h_vals.min() >= h_threshold

    # reconstruction: rho_K(theta) against the dual transform of the density
    thetas = sample_sphere_uniform(n, config.n_rec, [config.seed, 4])
    rho_vals = body.rho(thetas)
    estimates = np.empty(config.n_rec)
    ses = np.empty(config.n_rec)
    for j, theta in enumerate(thetas):
        estimates[j], ses[j] = _reconstruction_estimate(
            u, theta, a, config.n_rec_groups, config.n_h_inner, [config.seed, 5, j]
        )
    errors = np.abs(rho_vals - estimates)
    tol_abs = config.rec_tol_rel * float(rho_vals.max())
    se_floor = float(np.sqrt(np.mean(ses**2)))  # pooled; per-direction SEs are noisy
    per_dir_tol = np.maximum(tol_abs, config.se_mult * np.maximum(ses, se_floor))
    rec_ok = bool(np.all(errors <= per_dir_tol))
    ratio = estimates / rho_vals
    cert.reconstruction = {
        "sup_error": float(errors.max()),
        "max_se": float(ses.max()),
        "pooled_se": se_floor,
        "tolerance_abs": tol_abs,
        "pass_fraction": float(np.mean(errors <= per_dir_tol)),
        "mean_ratio": float(ratio.mean()),
        "max_ratio_deviation": float(np.abs(ratio - 1.0).max()),
        "count": int(config.n_rec),
    }

    if not positivity_ok:
        cert.verdict = "failed_positivity"
    elif not rec_ok:
        cert.verdict = "failed_reconstruction"
    else:
        cert.verdict = "certified"
    cert.wall_time_s = time.perf_counter() - t0
    return cert


@dataclass
class SectionReport:
    dim: int
    section_dim: int
    n_sections: int
    fraction_hypothesis_holds: float
    worst_margin: float
    volume_first: float
    volume_second: float
    implication_verdict: str
    samples: list

    def to_dict(self):
        return {
            "dim": self.dim,
            "section_dim": self.section_dim,
            "n_sections": self.n_sections,
            "fraction_hypothesis_holds": self.fraction_hypothesis_holds,
            "worst_margin": self.worst_margin,
            "volume_first": self.volume_first,
            "volume_second": self.volume_second,
            "implication_verdict": self.implication_verdict,
            "samples": self.samples,
        }


def section_dominance_check(body_k, body_l, m, n_sections=64, rule_size=256, seed=0):
    """Sample Haar sections E in G(n, m) and compare Vol(K cap E) vs Vol(L cap E).

    implication_verdict: "consistent" when the sampled hypothesis holds and
    Vol(K) <= Vol(L); "hypothesis_violated" when some section fails;
    "CONCLUSION_VIOLATED" when every sampled section satisfies the hypothesis
    yet Vol(K) > Vol(L). The last must never fire when K is a certified
    radial-power body. Both bodies are integrated on the same rules, so
    identical bodies compare exactly equal.
    """
    if body_k.dim != body_l.dim:
        raise InvalidArgumentError("bodies must share the ambient dimension")
    n = body_k.dim
    if not (1 <= m <= n):
        raise InvalidArgumentError(f"section dimension must lie in [1, {n}]")
    slack = 1e-12
    samples = []
    hypothesis_holds = True
    worst = np.inf
    for i in range(n_sections):
        E = sample_grassmann_haar(n, m, [seed, 11, i])
        rule = subsphere_quadrature(E, rule_size, seed=[seed, 12, i])
        vk = section_volume(body_k, E, rule)
        vl = section_volume(body_l, E, rule)
        margin = vl - vk
        worst = min(worst, margin)
        holds = vk <= vl + slack * max(1.0, abs(vl))
        hypothesis_holds = hypothesis_holds and holds
        samples.append({"index": i, "vol_k_section": vk, "vol_l_section": vl, "margin": margin})
    vol_rule = sphere_quadrature(
        n, max(4096, rule_size), kind="product_gauss" if n == 3 else "symmetrized", seed=[seed, 13]
    )
    vol_k = volume(body_k, vol_rule)
    vol_l = volume(body_l, vol_rule)
    if not hypothesis_holds:
        verdict = "hypothesis_violated"
    elif vol_k <= vol_l + slack * max(1.0, vol_l):
        verdict = "consistent"
    else:
        verdict = "CONCLUSION_VIOLATED"
    return SectionReport(
        dim=n,
        section_dim=m,
        n_sections=n_sections,
        fraction_hypothesis_holds=float(np.mean([s["margin"] >= -slack for s in samples])),
        worst_margin=float(worst),
        volume_first=float(vol_k),
        volume_second=float(vol_l),
        implication_verdict=verdict,
        samples=samples,
    )
