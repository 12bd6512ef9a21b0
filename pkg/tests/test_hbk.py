import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlab import hbk, hplane, mat3, symspace
from xlab.errors import ConvergenceError, ValidationError

O = np.eye(3)


def random_so3(rng):
    A = rng.normal(size=(3, 3))
    return mat3.expm(A - A.T)


def random_point(rng, scale=0.7):
    A = rng.normal(scale=scale, size=(3, 3))
    Z = 0.5 * (A + A.T)
    Z -= np.trace(Z) / 3 * np.eye(3)
    return mat3.expm(2 * Z)


def lie_b_basis():
    return hbk.lie_b(1.0, 0.0), hbk.lie_b(0.0, 1.0)


class TestB:
    def test_exp_matches_lie(self):
        assert np.allclose(hbk.exp_b(0.3, -0.8), mat3.expm(hbk.lie_b(0.3, -0.8)))

    def test_a_t_in_b(self):
        assert np.allclose(hbk.exp_b(0.6, 0.0), hplane.a_t(0.6))

    def test_norm(self):
        assert hbk.b_norm(0.5, 0.0) == pytest.approx(symspace.distance_elt(O, hplane.a_t(0.5)))

    def test_b_plus(self):
        assert hbk.in_b_plus(0.2, 0.7)
        assert not hbk.in_b_plus(0.7, 0.2)


class TestWeyl:
    def test_normalizes_b(self):
        for w in hbk.wyl_reps():
            for X in lie_b_basis():
                Y = w @ X @ w.T
                # w X w^-1 stays in the span of the basis
                t, s = Y[0, 0], Y[0, 2]
                assert np.abs(Y - hbk.lie_b(t, s)).max() <= 1e-10

    def test_identity_first(self):
        assert np.allclose(hbk.wyl_reps()[0], np.eye(3))

    def test_distinct_cosets(self):
        reps = hbk.wyl_reps()
        for i in range(len(reps)):
            for j in range(i + 1, len(reps)):
                assert hbk.coset_separation(reps[i], reps[j]) >= 0.1


class TestDecompose:
    def test_pure_b(self):
        f = hbk.hbk_decompose(hbk.exp_b(0.2, 0.7))
        assert f.b == pytest.approx((0.2, 0.7), abs=1e-8)
        assert np.allclose(hbk.hbk_reconstruct(f), hbk.exp_b(0.2, 0.7), atol=1e-8)

    def test_constructed(self):
        k = random_so3(np.random.default_rng(0))
        g = hplane.h_s(0.4) @ hbk.exp_b(0.2, 0.7) @ k
        f = hbk.hbk_decompose(g)
        assert f.b == pytest.approx((0.2, 0.7), abs=1e-8)
        assert symspace.distance(symspace.point_of(f.h), symspace.point_of(hplane.h_s(0.4))) <= 1e-8
        assert np.abs(hbk.hbk_reconstruct(f) - g).max() <= 1e-8

    def test_gamma_cross_oracle(self):
        g = hbk.gamma(1.0, 1.5)
        f = hbk.hbk_decompose(g)
        assert np.abs(hbk.hbk_reconstruct(f) - g).max() <= 1e-8 * np.abs(g).max()
        x = symspace.point_of(g)
        assert symspace.distance(symspace.point_of(f.h), hbk.project_oracle(x)) <= 1e-5

    def test_random_factors(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            g = mat3.expm(rng.normal(scale=0.8, size=(3, 3)) * np.array([[1, 1, 1], [1, 1, 1], [1, 1, 1]]))
            g /= np.cbrt(np.linalg.det(g))
            f = hbk.hbk_decompose(g, strict=False)
            assert hplane.in_h(f.h)
            assert hbk.in_b_plus(*f.b)
            assert np.allclose(f.k @ f.k.T, np.eye(3), atol=1e-9)
            assert np.abs(hbk.hbk_reconstruct(f) - g).max() <= 1e-8 * np.abs(g).max()

    def test_batch_matches(self):
        rng = np.random.default_rng(2)
        G = np.array([hplane.random_h(rng) @ hbk.exp_b(*rng.uniform(-1, 1, 2)) @ random_so3(rng) for _ in range(30)])
        h, w, b, k = hbk.hbk_decompose_batch(G)
        for i, g in enumerate(G):
            f = hbk.hbk_decompose(g, strict=False)
            assert np.hypot(*b[i]) == pytest.approx(np.hypot(*f.b), abs=1e-7)


class TestProject:
    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
    def test_a_t(self, t):
        assert symspace.distance(hbk.project(symspace.point_of(hplane.a_t(t))), O) <= 1e-9

    def test_fiber_inputs(self):
        rng = np.random.default_rng(3)
        h = hplane.h_s(2.0)
        for _ in range(20):
            b = hbk.exp_b(*rng.uniform(-2, 2, 2))
            y = hbk.project(symspace.point_of(h @ b))
            assert symspace.distance(y, symspace.point_of(h)) <= 1e-8

    def test_oracle_agreement(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            x = random_point(rng)
            assert symspace.distance(hbk.project(x), hbk.project_oracle(x)) <= 1e-5

    def test_oracle_fixed_points(self):
        assert symspace.distance(hbk.project_oracle(O), O) <= 1e-6
        y = symspace.point_of(hplane.random_h(np.random.default_rng(5)))
        assert symspace.distance(hbk.project_oracle(y), y) <= 1e-6

    def test_lipschitz_and_equivariance(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            x, y = random_point(rng), random_point(rng)
            assert symspace.distance(hbk.project(x), hbk.project(y)) <= symspace.distance(x, y) + 1e-7
            h = hplane.random_h(rng)
            assert symspace.distance(hbk.project(symspace.act(h, x)), symspace.act(h, hbk.project(x))) <= 1e-7

    def test_projects_onto_y(self):
        y = hbk.project(random_point(np.random.default_rng(7)))
        assert symspace.distance(hbk.project(y), y) <= 1e-9


class TestSamplers:
    def test_fiber_projects_to_base(self):
        y = symspace.point_of(hplane.random_h(np.random.default_rng(8)))
        cloud = hbk.fiber_sample(y, 1.5, 4)
        for p in cloud.points:
            assert symspace.distance(hbk.project(p), y) <= 1e-6

    def test_fiber_single_point(self):
        cloud = hbk.fiber_sample(O, 0.0, 1)
        assert len(cloud.elts) == 1 and np.allclose(cloud.points[0], O)

    def test_fiber_translation(self):
        r = hbk.fiber_translation_check(0.25, radius=1.0, n=3)
        assert r.passed and r.hausdorff <= r.bound

    def test_a_c_preserves_fiber(self):
        # a_c lies in B, so it maps the fiber over o into itself
        cloud = hbk.fiber_sample(O, 1.0, 3)
        a = hplane.a_t(0.5)
        for p in cloud.points:
            assert symspace.distance(hbk.project(a @ p @ a.T), O) <= 1e-8

    def test_floating_plane_t_zero_on_y(self):
        c = hbk.floating_plane_sample(hbk.FloatingPlane(np.eye(3), 0.0), (-1, 1), (-1, 1), 3, 3)
        for p in c.points:
            assert symspace.distance(hbk.project(p), p) <= 1e-9

    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_ultraparallel(self, t):
        r = hbk.ultraparallel_check(t)
        assert r.passed
        assert r.min_distance == pytest.approx(math.sqrt(6) * t, abs=1e-9)

    def test_gamma_zero(self):
        assert np.allclose(hbk.gamma(0.0, 0.0), hplane.K0)


class TestOrthogonalPlane:
    def test_contains_l(self):
        sample = hbk.orthogonal_plane()((-1, 1), (0, 0), 5, 1)
        for p in sample.points:
            assert symspace.distance(hbk.project(p), p) <= 1e-9

    def test_tangent_orthogonality(self):
        assert hbk.orthogonality_residual() <= 1e-10

    def test_generic_point_off_y(self):
        p = hbk.orthogonal_plane()((0.3, 0.3), (0.8, 0.8), 1, 1).points[0]
        assert symspace.distance(hbk.project(p), p) > 0.1


class TestNarrowing:
    def test_zero_at_s_zero(self):
        assert hbk.projection_profile(1.0, [0.0])[0][1] == pytest.approx(0.0, abs=1e-8)

    def test_decreasing(self):
        grid = np.linspace(-10, 10, 81)
        sup1 = max(d for _, d in hbk.projection_profile(1.0, grid))
        sup4 = max(d for _, d in hbk.projection_profile(4.0, grid))
        assert sup4 < sup1

    def test_bounded(self):
        grid = np.linspace(-10, 10, 41)
        vals = [d for t in (0.25, 1.0, 8.0) for _, d in hbk.projection_profile(t, grid)]
        assert max(vals) < 1.0

    def test_closed_form_distance(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            y = symspace.point_of(hplane.random_h(rng))
            p = hplane.disk_of_sym_point(y)
            assert hbk.distance_to_l(y) == pytest.approx(hbk.distance_to_l_closed_form(p), abs=1e-7)

    def test_t_zero_rejected(self):
        with pytest.raises(ValidationError):
            hbk.projection_profile(0.0, [1.0])


class TestThetaPrime:
    def test_sin_zero(self):
        assert hbk.theta_prime(0.0, 0.7) == 0.0

    def test_quarter(self):
        tp = hbk.theta_prime(math.pi / 2, 1.3)
        assert abs(math.cos(tp)) <= 1e-12
        Q = hbk.rotation_product(tp, math.pi / 2, 1.3)
        assert np.abs(Q - np.diag(np.diag(Q))).max() <= 1e-10
        assert np.all(np.diag(Q) > 0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3.0, 3.0), st.floats(-2.0, 2.0))
    def test_upper_triangular_positive(self, th, c):
        Q = hbk.rotation_product(hbk.theta_prime(th, c), th, c)
        assert np.abs(np.tril(Q, -1)).max() <= 1e-10 * np.abs(Q).max()
        if abs(math.sin(th)) >= 1e-15:
            assert np.all(np.diag(Q) > 0)

    @pytest.mark.parametrize("th", [0.4, 1.0, 2.5, -2.0])
    def test_diagonal_at_c_zero(self, th):
        Q = hbk.rotation_product(hbk.theta_prime(th, 0.0), th, 0.0)
        assert np.allclose(Q, np.eye(3), atol=1e-12)

    def test_generic_not_diagonal(self):
        # no angle makes the product diagonal once c != 0 and sin 2 theta != 0
        grid = np.linspace(-math.pi, math.pi, 4001)
        Qs = [hbk.rotation_product(t, 1.0, 1.0) for t in grid]
        off = [np.abs(Q - np.diag(np.diag(Q))).max() for Q in Qs]
        assert min(off) > 0.5


class TestJacobian:
    def test_ranks(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            h = hplane.random_h(rng)
            assert hbk.jacobian_rank("gd", (h, 0.3, 1.1), 1.0) == 5
            assert hbk.jacobian_rank("mul2", (h, 0.3, -0.4), 1.0) == 3
            assert hbk.jacobian_rank("gd", (h, 0.3, 1.1), 0.0) <= 3

    def test_unknown_map(self):
        with pytest.raises(ValidationError):
            hbk.jacobian_rank("nope", (np.eye(3), 0, 0), 1.0)


class TestLimitFlags:
    def test_gamma_flag_in_fiber_limit_set(self):
        f = symspace.flag_of(hbk.gamma(10.0, 10.0))
        assert hbk.fiber_limit_flags_distance(f, 91) <= 1e-2

    def test_generic_flag_far(self):
        f = symspace.flag_from_point_line(np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        assert hbk.fiber_limit_flags_distance(f, 91) > 1e-2


def test_oracle_raises_on_no_convergence():
    with pytest.raises(ConvergenceError):
        hbk.project_oracle(random_point(np.random.default_rng(11), 2.0), starts=((0.0, 0.0),), max_iter=1)
