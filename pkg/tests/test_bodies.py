import math

import numpy as np
import pytest

from geotomo import bodies, sphere
from geotomo.bodies import (
    Ball,
    Ellipsoid,
    LpBall,
    ZonalPerturbation,
    body_from_descriptor,
    dilate,
    intersection_body_of,
    minkowski_functional,
    perturbed_ball,
    power_transform,
    radial,
    radial_distance,
    radial_sum_k,
    section_volume,
    unit_ball_volume,
    validate_body,
    volume,
)
from geotomo.errors import InvalidArgumentError, InvalidBodyError


def rejection_volume_estimate(body, count=200_000, seed=0):
    """Independent volume oracle: rejection sampling in a bounding box."""
    n = body.dim
    rng = np.random.default_rng(seed)
    probe = sphere.sample_sphere_uniform(n, 4000, seed)
    radius = body.rho(probe).max() * 1.001
    x = rng.uniform(-radius, radius, size=(count, n))
    norms = np.linalg.norm(x, axis=1)
    keep = norms > 0
    inside = np.zeros(count, dtype=bool)
    inside[keep] = norms[keep] <= body.rho(x[keep] / norms[keep][:, None])
    return inside.mean() * (2 * radius) ** n


class TestRadial:
    def test_unit_ball(self):
        K = Ball(3)
        for theta in sphere.sample_sphere_uniform(3, 5, 0):
            assert radial(K, theta) == 1.0

    def test_ellipsoid_semi_axis(self):
        K = Ellipsoid(np.diag([1.0, 0.25]))
        assert radial(K, np.array([0.0, 1.0])) == pytest.approx(2.0)

    def test_power_of_ellipsoid(self):
        base = Ellipsoid(np.diag([1.0, 1.0, 1.0, 1.0, 1 / 16]))
        K = power_transform(base, 0.5)
        assert radial(K, np.eye(5)[:, 4]) == pytest.approx(2.0)

    def test_evenness(self):
        K = Ellipsoid(np.array([[2.0, 0.3], [0.3, 1.0]]))
        pts = sphere.sample_sphere_uniform(2, 100, 1)
        assert np.abs(K.rho(pts) - K.rho(-pts)).max() <= 1e-12


class TestMinkowskiFunctional:
    def test_unit_ball_norm(self):
        assert minkowski_functional(Ball(3), np.array([3.0, 4.0, 0.0])) == pytest.approx(5.0)

    def test_zero_at_origin(self):
        assert minkowski_functional(Ellipsoid(np.diag([2.0, 3.0])), np.zeros(2)) == 0.0

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        K = Ellipsoid(np.diag([1.0, 2.0, 0.5]))
        for _ in range(5):
            x = rng.standard_normal(3)
            assert minkowski_functional(K, 2 * x) == pytest.approx(
                2 * minkowski_functional(K, x), rel=1e-12
            )


class TestVolume:
    def test_unit_ball_volume_n3(self):
        rule = sphere.sphere_quadrature(3, 512, kind="product_gauss")
        assert volume(Ball(3), rule) == pytest.approx(4 * math.pi / 3, abs=1e-10)

    def test_ellipsoid_volume_matches_determinant_and_rejection(self):
        # semi-axes (1, 2, 3): A = diag(1, 1/4, 1/9); Vol = Vol(D_3) * 6 = 8 pi
        K = Ellipsoid(np.diag([1.0, 0.25, 1 / 9]))
        rule = sphere.sphere_quadrature(3, 5000, kind="product_gauss")
        got = volume(K, rule)
        assert got == pytest.approx(8 * math.pi, rel=1e-8)
        assert got == pytest.approx(rejection_volume_estimate(K, seed=3), rel=0.02)

    def test_dilation_scaling(self):
        rng = np.random.default_rng(4)
        g = rng.standard_normal((4, 4))
        K = Ellipsoid(g @ g.T + 4 * np.eye(4))
        rule = sphere.sphere_quadrature(4, 4000, kind="symmetrized", seed=1)
        c = 1.37
        assert volume(dilate(K, c), rule) == pytest.approx(c**4 * volume(K, rule), rel=1e-10)


class TestSectionVolume:
    def test_ball_section_is_lower_dimensional_ball(self):
        E = sphere.sample_grassmann_haar(5, 3, seed=5)
        assert section_volume(Ball(5), E) == pytest.approx(4 * math.pi / 3, rel=1e-10)

    def test_planar_ellipse_area(self):
        K = Ellipsoid(np.diag([1.0, 1.0, 0.25]))
        E = sphere.Subspace(np.eye(3)[:, :2])
        assert section_volume(K, E) == pytest.approx(math.pi, rel=1e-10)

    def test_restricted_form_oracle(self):
        rng = np.random.default_rng(6)
        g = rng.standard_normal((5, 5))
        K = Ellipsoid(g @ g.T + 3 * np.eye(5))
        for i in range(5):
            E = sphere.sample_grassmann_haar(5, 2, seed=[61, i])
            restricted = E.frame.T @ K.matrix @ E.frame
            oracle = unit_ball_volume(2) / math.sqrt(np.linalg.det(restricted))
            assert section_volume(K, E) == pytest.approx(oracle, rel=1e-8)

    def test_chord_length_m1(self):
        K = Ellipsoid(np.diag([1.0, 0.25, 1.0]))
        E = sphere.span(np.array([0.0, 1.0, 0.0]))
        assert section_volume(K, E) == pytest.approx(4.0, rel=1e-12)

    def test_full_dimension_section_equals_volume(self):
        K = Ellipsoid(np.diag([1.0, 2.0, 0.7]))
        E = sphere.Subspace(np.eye(3))
        rule = sphere.sphere_quadrature(3, 2048, kind="product_gauss")
        assert section_volume(K, E, rule) == pytest.approx(volume(K, rule), rel=1e-10)

    def test_dilation_monotonicity(self):
        K = Ellipsoid(np.diag([1.0, 0.5, 2.0, 1.0]))
        L = dilate(K, 1.25)
        for i in range(6):
            E = sphere.sample_grassmann_haar(4, 2, seed=[71, i])
            rule = sphere.subsphere_quadrature(E, 64)
            vk = section_volume(K, E, rule)
            vl = section_volume(L, E, rule)
            assert vl == pytest.approx(1.25**2 * vk, rel=1e-10)
            assert vl >= vk


class TestComposites:
    def test_radial_sum_of_balls(self):
        two = radial_sum_k([Ball(3), Ball(3)], 2.0)
        assert radial(two, np.eye(3)[:, 0]) == pytest.approx(math.sqrt(2))
        one = radial_sum_k([Ball(3), Ball(3)], 1.0)
        assert radial(one, np.eye(3)[:, 0]) == pytest.approx(2.0)

    def test_radial_sum_of_ellipsoids(self):
        a = Ellipsoid(np.diag([1.0, 4.0]))
        b = Ellipsoid(np.diag([4.0, 1.0]))
        s = radial_sum_k([a, b], 1.0)
        assert radial(s, np.array([1.0, 0.0])) == pytest.approx(1.5)

    def test_radial_sum_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            radial_sum_k([], 1.0)

    def test_power_transform_identity_and_composition(self):
        K = Ellipsoid(np.diag([1.0, 2.0, 0.5]))
        pts = sphere.sample_sphere_uniform(3, 100, 7)
        assert np.allclose(power_transform(K, 1.0).rho(pts), K.rho(pts))
        composed = power_transform(power_transform(K, 0.4), 2.5)
        assert np.abs(composed.rho(pts) - K.rho(pts)).max() <= 1e-12
        ball4 = dilate(Ball(3), 4.0)
        assert radial(power_transform(ball4, 0.5), np.eye(3)[:, 0]) == pytest.approx(2.0)

    def test_volume_invariant_under_unit_power(self):
        K = Ellipsoid(np.diag([1.0, 1.5, 0.8]))
        rule = sphere.sphere_quadrature(3, 1000, kind="product_gauss")
        assert volume(power_transform(K, 1.0), rule) == pytest.approx(volume(K, rule), abs=1e-12)


class TestRadialDistance:
    def test_identity(self):
        K = Ellipsoid(np.diag([1.0, 2.0, 0.5]))
        assert radial_distance(K, K) == 0.0

    def test_dilated_ball(self):
        assert radial_distance(Ball(4), dilate(Ball(4), 2.0)) == pytest.approx(1.0)

    def test_triangle_inequality(self):
        grid = sphere.sample_sphere_uniform(3, 2000, 8)
        ks = [
            Ellipsoid(np.diag([1.0, 2.0, 0.5])),
            Ball(3),
            LpBall(3, 4.0),
        ]
        dab = radial_distance(ks[0], ks[1], grid)
        dbc = radial_distance(ks[1], ks[2], grid)
        dac = radial_distance(ks[0], ks[2], grid)
        assert dac <= dab + dbc + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            radial_distance(Ball(3), Ball(4))


class TestIntersectionBody:
    def test_ball_maps_to_scaled_ball(self):
        ib = intersection_body_of(Ball(3))
        for theta in sphere.sample_sphere_uniform(3, 4, 9):
            assert radial(ib, theta) == pytest.approx(math.pi, rel=1e-10)

    def test_general_dimension_constant(self):
        ib = intersection_body_of(Ball(5), rule_size=256)
        theta = sphere.unit_vector(np.array([1.0, 1.0, 0.0, 0.0, 1.0]))
        assert radial(ib, theta) == pytest.approx(unit_ball_volume(4), rel=1e-8)

    def test_ellipsoid_axis_section(self):
        K = Ellipsoid(np.diag([1.0, 1.0, 0.25]))
        ib = intersection_body_of(K)
        assert radial(ib, np.array([0.0, 0.0, 1.0])) == pytest.approx(math.pi, rel=1e-10)

    def test_cache_is_idempotent(self):
        ib = intersection_body_of(Ball(3))
        theta = np.array([1.0, 0.0, 0.0])
        first = radial(ib, theta)
        assert radial(ib, theta) == first
        assert len(ib._cache) == 1


class TestPerturbedBall:
    def test_zero_epsilon_is_unit_ball(self):
        phi = ZonalPerturbation(3, 2)
        K = perturbed_ball(3, 0.0, phi)
        pts = sphere.sample_sphere_uniform(3, 50, 10)
        assert np.abs(K.rho(pts) - 1.0).max() == 0.0

    def test_zonal_value_at_pole(self):
        # P_2(1) = 1, so rho(e_3) = 1 + eps
        phi = ZonalPerturbation(3, 2, axis=[0.0, 0.0, 1.0])
        K = perturbed_ball(3, 0.1, phi)
        assert radial(K, np.array([0.0, 0.0, 1.0])) == pytest.approx(1.1, abs=1e-14)

    def test_evenness(self):
        phi = ZonalPerturbation(4, 4)
        K = perturbed_ball(4, 0.2, phi)
        pts = sphere.sample_sphere_uniform(4, 100, 11)
        assert np.abs(K.rho(pts) - K.rho(-pts)).max() <= 1e-12

    def test_nonpositive_radial_rejected(self):
        phi = ZonalPerturbation(3, 2, axis=[0.0, 0.0, 1.0])
        with pytest.raises(InvalidBodyError):
            perturbed_ball(3, 2.5, phi)  # 1 - 2.5/2 < 0 on the equator


class TestDescriptors:
    def test_round_trip_composite(self):
        desc = {
            "dim": 3,
            "type": "power",
            "alpha": 0.5,
            "base": {
                "dim": 3,
                "type": "radial_sum",
                "k": 1.0,
                "bodies": [
                    {"dim": 3, "type": "ellipsoid", "matrix": np.diag([1.0, 2.0, 3.0]).tolist()},
                    {"dim": 3, "type": "ball"},
                ],
            },
        }
        K = body_from_descriptor(desc)
        assert K.descriptor() == desc
        validate_body(K, grid_size=2000)

    def test_non_spd_matrix_message(self):
        desc = {"dim": 2, "type": "ellipsoid", "matrix": [[1.0, 0.0], [0.0, -1.0]]}
        with pytest.raises(InvalidBodyError, match="not positive definite"):
            body_from_descriptor(desc)

    def test_unknown_type_names_path(self):
        with pytest.raises(InvalidArgumentError, match="body.type"):
            body_from_descriptor({"dim": 3, "type": "torus"})

    def test_nested_path_in_error(self):
        desc = {
            "dim": 3,
            "type": "dilate",
            "factor": 2.0,
            "base": {"dim": 3, "type": "ellipsoid", "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 0]]},
        }
        with pytest.raises(InvalidBodyError, match="body.base"):
            body_from_descriptor(desc)

    def test_perturbed_ball_round_trip(self):
        desc = {
            "dim": 3,
            "type": "perturbed_ball",
            "epsilon": 0.1,
            "phi": {"kind": "zonal", "degree": 2, "axis": [0.0, 0.0, 1.0], "deriv_bound": 4.0},
        }
        K = body_from_descriptor(desc)
        assert K.descriptor() == desc


def test_fubini_decomposition_consistency():
    """Averaging subsphere integrals over G^H(n, n-3) inside a fixed hyperplane
    reproduces the direct integral over the hyperplane's sphere (n = 5)."""
    n = 5
    f = lambda p: 1.0 / (1.5 + p[:, 0] * p[:, 1] + 0.3 * p[:, 2] ** 2)
    H = sphere.sample_grassmann_haar(n, n - 1, seed=55)
    direct_rule = sphere.subsphere_quadrature(H, 20_000, kind="symmetrized", seed=1)
    direct, direct_se = sphere.integrate_sphere_with_se(f, direct_rule)
    count = 400
    values = np.empty(count)
    for i in range(count):
        E = sphere.sample_subspace_containing(H, n - 3, seed=[56, i], contained=True)
        rule = sphere.subsphere_quadrature(E, 64)
        values[i] = sphere.integrate_sphere(f, rule)
    nested, nested_se = sphere.mean_with_se(values)
    assert abs(nested - direct) <= 3 * math.hypot(direct_se, nested_se) + 1e-12
