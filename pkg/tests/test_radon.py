import math

import numpy as np
import pytest

from geotomo import harmonics, radon, sphere
from geotomo.bodies import Ball, Ellipsoid, ZonalPerturbation, dilate, perturbed_ball
from geotomo.errors import BandlimitInsufficientError
from geotomo.radon import (
    GrassmannDensity,
    fourier_constant,
    fourier_norm_inverse,
    fourier_norm_power,
    funk_inverse_body,
    funk_transform_body,
    radon_dual,
    radon_forward,
)


class TestRadonForward:
    def test_constant(self):
        E = sphere.sample_grassmann_haar(4, 2, seed=1)
        assert radon_forward(lambda p: np.ones(len(p)), E) == pytest.approx(1.0, abs=1e-14)

    def test_circle_moment(self):
        E = sphere.Subspace(np.eye(3)[:, :2])
        assert radon_forward(lambda p: p[:, 0] ** 2, E, rule_size=64) == pytest.approx(0.5, abs=1e-12)

    def test_funk_case_matches_multiplier(self):
        # zonal degree-2 harmonic on S^2 through the equator of its own axis
        f = lambda p: harmonics.ZonalKernel(3, 2)(p @ np.array([0.0, 0.0, 1.0])) / 5.0
        E = sphere.Subspace(np.eye(3)[:, :2])  # e3-perp
        val = radon_forward(f, E, rule_size=64)
        assert val == pytest.approx(-0.5 * f(np.array([[0.0, 0.0, 1.0]]))[0], abs=1e-10)


class TestRadonDual:
    def test_constant_density(self):
        dens = GrassmannDensity(5, 3, generator=lambda sub: 4.2)
        val, se = radon_dual(dens, np.eye(5)[:, 0], mc_count=32, seed=0)
        assert val == pytest.approx(4.2, abs=1e-14)
        assert se <= 1e-14

    def test_duality_identity(self):
        # <f, R_m^* g> = <R_m f, g> for g = R_m(f0), both sides by independent MC
        n, m = 5, 3
        rng = np.random.default_rng(13)
        axes = sphere.sample_sphere_uniform(n, 2, seed=3)

        def f(p):
            p = np.atleast_2d(p)
            return 1.0 + 0.5 * (p @ axes[0]) ** 2 + 0.25 * (p @ axes[1]) ** 4

        def f0(p):
            p = np.atleast_2d(p)
            return np.exp(p @ axes[0]) + np.exp(-(p @ axes[0]))

        def g(sub):
            return radon_forward(f0, sub, rule_size=96)

        dens = GrassmannDensity(n, m, generator=g)
        # left side: E_theta[f(theta) R*g(theta)]
        thetas = sphere.sample_sphere_uniform(n, 160, seed=17)
        left_samples = np.empty(len(thetas))
        for i, theta in enumerate(thetas):
            val, _ = radon_dual(dens, theta, mc_count=24, seed=[18, i])
            left_samples[i] = f(theta[None])[0] * val
        left, left_se = sphere.mean_with_se(left_samples)
        # right side: E_E[R_m f(E) g(E)]
        right_samples = np.empty(160)
        for i in range(160):
            E = sphere.sample_grassmann_haar(n, m, seed=[19, i])
            right_samples[i] = radon_forward(f, E, rule_size=96) * g(E)
        right, right_se = sphere.mean_with_se(right_samples)
        assert abs(left - right) <= 3 * math.hypot(left_se, right_se)

    def test_plane_family_oracle_n3(self):
        # R_2^* of g(E) = (u . n_E)^2 at theta = u, against a direct
        # 1-parameter quadrature over planes containing u
        u = sphere.unit_vector(np.array([0.3, -0.5, 0.8]))

        def g(sub):
            normal = np.cross(sub.frame[:, 0], sub.frame[:, 1])
            normal /= np.linalg.norm(normal)
            return float((u @ normal) ** 2)

        dens = GrassmannDensity(3, 2, generator=g)
        val, se = radon_dual(dens, u, mc_count=4000, seed=5)
        # planes containing u have normals on the circle u-perp, so
        # (u . n)^2 = 0 identically; the dual transform must return 0
        assert abs(val - 0.0) <= 3 * se + 1e-12

        # non-degenerate variant: g(E) = (w . n_E)^2 for a fixed w != u;
        # direct parameterization of the normal circle gives the oracle
        w = sphere.unit_vector(np.array([1.0, 0.4, -0.2]))

        def g2(sub):
            normal = np.cross(sub.frame[:, 0], sub.frame[:, 1])
            normal /= np.linalg.norm(normal)
            return float((w @ normal) ** 2)

        dens2 = GrassmannDensity(3, 2, generator=g2)
        val2, se2 = radon_dual(dens2, u, mc_count=4000, seed=6)
        basis = sphere.hyperplane_orthogonal_to(u).frame
        ang = 2 * np.pi * np.arange(4096) / 4096
        normals = np.cos(ang)[:, None] * basis[:, 0] + np.sin(ang)[:, None] * basis[:, 1]
        oracle = float(((normals @ w) ** 2).mean())
        assert abs(val2 - oracle) <= 3 * se2


class TestFunkBody:
    def test_ball_transforms_to_constant(self):
        exp = funk_transform_body(Ball(4), 4)
        pts = sphere.sample_sphere_uniform(4, 20, 1)
        assert np.abs(exp(pts) - 1.0).max() <= 1e-10

    def test_perturbed_ball_scales_band(self):
        eps = 0.05
        K = perturbed_ball(3, eps, ZonalPerturbation(3, 2, axis=[0.0, 0.0, 1.0]))
        exp = funk_transform_body(K, 8)
        pts = sphere.sample_sphere_uniform(3, 50, 2)
        phi = K.phi(pts)
        assert np.abs(exp(pts) - (1.0 - 0.5 * eps * phi)).max() <= 1e-9

    def test_agreement_with_quadrature_forward(self):
        K = Ellipsoid(np.diag([1.0, 1.05, 0.95]))
        exp = funk_transform_body(K, 8)
        for theta in sphere.sample_sphere_uniform(3, 50, 3):
            hyper = sphere.hyperplane_orthogonal_to(theta)
            quad = radon_forward(K.rho, hyper, rule_size=128)
            assert quad == pytest.approx(exp(theta[None])[0], abs=1e-6)

    def test_bandlimit_gate(self):
        K = Ellipsoid(np.diag([1.0, 1.0, 0.02]))
        with pytest.raises(BandlimitInsufficientError) as err:
            funk_transform_body(K, 4)
        assert err.value.residual > 0

    def test_inverse_ball(self):
        exp = funk_inverse_body(Ball(5), 8)
        pts = sphere.sample_sphere_uniform(5, 20, 4)
        assert np.abs(exp(pts) - 1.0).max() <= 1e-9

    def test_inverse_perturbed_ball(self):
        eps = 0.04
        K = perturbed_ball(3, eps, ZonalPerturbation(3, 2, axis=[0.0, 0.0, 1.0]))
        exp = funk_inverse_body(K, 8)
        pts = sphere.sample_sphere_uniform(3, 50, 5)
        phi = K.phi(pts)
        assert np.abs(exp(pts) - (1.0 - 2.0 * eps * phi)).max() <= 1e-9

    def test_round_trip_sup_norm(self):
        K = Ellipsoid(np.diag([1.0, 1.1, 0.9]))
        u = funk_inverse_body(K, 8)
        back = harmonics.funk_transform(u)
        surrogate = harmonics.expand(K.rho, 3, 8)
        pts = sphere.sample_sphere_uniform(3, 200, 6)
        assert np.abs(back(pts) - surrogate(pts)).max() <= 1e-8

    def test_odd_functions_annihilated_even_preserved(self):
        odd = lambda p: p[:, 0] * (1.0 + p[:, 1] ** 2)
        theta = sphere.unit_vector(np.array([0.2, 0.5, 0.8]))
        hyper = sphere.hyperplane_orthogonal_to(theta)
        assert abs(radon_forward(odd, hyper, rule_size=64)) <= 1e-14
        even = lambda p: p[:, 0] ** 2
        vals = [
            radon_forward(even, sphere.hyperplane_orthogonal_to(t), rule_size=64)
            for t in (theta, -theta)
        ]
        assert vals[0] == pytest.approx(vals[1], abs=1e-14)

    def test_self_adjointness(self):
        basis = harmonics.get_basis(3, 8)
        grid = basis.grid
        axes = sphere.sample_sphere_uniform(3, 2, seed=7)
        f = lambda p: 1.0 + 0.3 * harmonics.ZonalKernel(3, 4)(np.atleast_2d(p) @ axes[0]) / 9.0
        g = lambda p: 1.0 + 0.5 * harmonics.ZonalKernel(3, 2)(np.atleast_2d(p) @ axes[1]) / 5.0
        rf = np.array(
            [radon_forward(f, sphere.hyperplane_orthogonal_to(t), rule_size=64) for t in grid.nodes]
        )
        rg = np.array(
            [radon_forward(g, sphere.hyperplane_orthogonal_to(t), rule_size=64) for t in grid.nodes]
        )
        left = float(np.dot(grid.weights, rf * g(grid.nodes)))
        right = float(np.dot(grid.weights, f(grid.nodes) * rg))
        assert left == pytest.approx(right, abs=1e-6)


class TestFourierBridge:
    def test_ball_constant(self):
        # for the unit ball the value is pi (n-1) Vol(D_{n-1}); n = 3: 2 pi^2
        val = fourier_norm_power(Ball(3), np.array([0.0, 0.0, 1.0]), rule_size=64)
        assert val == pytest.approx(2 * math.pi**2, abs=1e-8)
        for n in (4, 5):
            theta = np.eye(n)[:, 0]
            val = fourier_norm_power(Ball(n), theta, rule_size=256, kind="product_gauss")
            assert val == pytest.approx(fourier_constant(n), rel=1e-10)

    def test_dilation_scaling(self):
        K = Ellipsoid(np.diag([1.0, 1.2, 0.8]))
        theta = sphere.unit_vector(np.array([1.0, 1.0, 1.0]))
        base = fourier_norm_power(K, theta, rule_size=128)
        scaled = fourier_norm_power(dilate(K, 1.5), theta, rule_size=128)
        assert scaled == pytest.approx(1.5**2 * base, rel=1e-12)

    def test_inverse_direction_recovers_power(self):
        # Lemma-1 forward values, expanded, then spectrally inverted, match
        # (2 pi)^n rho^{n-1} on bandlimited surrogates (n = 3, L = 8)
        n, L = 3, 8
        K = Ellipsoid(np.diag([1.0, 1.05, 0.9]))
        fwd = lambda p: np.array(
            [fourier_norm_power(K, t, rule_size=96) for t in np.atleast_2d(p)]
        )
        exp = harmonics.expand(fwd, n, L)
        rec = fourier_norm_inverse(exp)
        pts = sphere.sample_sphere_uniform(n, 60, 9)
        target = (2 * math.pi) ** n * K.rho(pts) ** (n - 1)
        assert np.abs(rec(pts) - target).max() <= 1e-4 * np.abs(target).max()
