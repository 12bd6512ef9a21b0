import json
import math

import numpy as np
import pytest

from xlab import fuchsian as F
from xlab import hplane, symspace
from xlab.errors import NotProvablyDiscreteError, ValidationError


@pytest.fixture(scope="module")
def std():
    return F.standard_fixture()


@pytest.fixture(scope="module")
def strong():
    # lengths 6 in curvature -1 units
    ell = 6.0 * hplane.calibration()
    return F.schottky([((0.0, math.pi), ell), ((0.5 * math.pi, -0.5 * math.pi), ell)])


class TestLift:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            h = hplane.random_h(rng)
            assert np.allclose(F.symmetric_square(F.sl2_lift(h)), h, atol=1e-9)

    def test_homomorphism(self):
        rng = np.random.default_rng(1)
        A, B = (np.linalg.qr(rng.normal(size=(2, 2)))[0] @ np.diag([2.0, 0.5]) for _ in range(2))
        A /= math.sqrt(abs(np.linalg.det(A)))
        B /= math.sqrt(abs(np.linalg.det(B)))
        assert np.allclose(F.symmetric_square(A @ B), F.symmetric_square(A) @ F.symmetric_square(B))


class TestSchottky:
    def test_standard_certified(self, std):
        assert std.ping_pong is not None
        assert F.verify_ping_pong(std.generators, std.ping_pong) > 0

    def test_weak_generators_fail(self):
        with pytest.raises(NotProvablyDiscreteError):
            F.schottky([((0.0, 0.3), 0.1), ((0.1, 0.4), 0.1)])

    def test_coinciding_endpoints(self):
        with pytest.raises(ValidationError):
            F.schottky([((0.0, 0.0), 1.0), ((1.0, 2.0), 1.0)])

    def test_powers_keep_certificate(self, std):
        sq = F.power_subgroup(std, 2)
        assert F.verify_ping_pong(sq.generators, std.ping_pong) > 0

    def test_power_one_same_group(self, std):
        one = F.power_subgroup(std, 1)
        assert all(np.array_equal(a, b) for a, b in zip(one.generators, std.generators))

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_power_translation_lengths(self, std, n):
        p = F.power_subgroup(std, n)
        for g, gn in zip(std.generators, p.generators):
            assert hplane.translation_length(gn) == pytest.approx(n * hplane.translation_length(g), abs=1e-8)

    def test_injectivity_probe(self, std):
        mats, _ = F.word_ball(std, 4)
        flat = mats.reshape(len(mats), -1)
        flat = flat / np.abs(flat).max(axis=1, keepdims=True)
        from scipy.spatial import cKDTree

        assert not cKDTree(flat).query_pairs(1e-6)

    def test_mu_grows_linearly(self, std):
        lens, norms = [], []
        for r, (m, _) in enumerate(F.word_levels(std, 6), start=1):
            norms.append(np.linalg.norm(symspace.mu_batch(m), axis=1).min())
            lens.append(r)
        assert np.polyfit(lens, norms, 1)[0] > 0
        assert np.all(np.diff(norms) > 0)

    def test_json_roundtrip(self, std):
        back = F.WordGroupRep.from_json(std.to_json())
        assert all(np.array_equal(a, b) for a, b in zip(back.generators, std.generators))
        assert back.ping_pong == std.ping_pong
        assert json.loads(back.to_json()) == json.loads(std.to_json())


class TestWords:
    def test_reduced_word_counts(self):
        w = F.reduced_words(2, 3)
        assert len(w) == 4 + 12 + 36
        assert all(b != (a + 2) % 4 for x in w for a, b in zip(x, x[1:]))

    def test_word_matrix(self, std):
        g1, g2 = std.generators
        assert np.allclose(std.word_matrix((0, 3, 0)), g1 @ np.linalg.inv(g2) @ g1)

    def test_word_ball_size(self, std):
        mats, lens = F.word_ball(std, 2)
        assert len(mats) == 1 + 4 + 12 and lens[0] == 0

    def test_displacement_matches_hilbert(self, std):
        g = std.word_matrix((0, 1))
        d = F.displacement(g[None])[0]
        assert d * hplane.calibration() == pytest.approx(symspace.distance_elt(np.eye(3), g), rel=1e-9)


class TestLimitSet:
    def test_depth_one(self, std):
        s = F.limit_set(std, 1)
        assert len(s.points) == 4
        for th, g in zip(s.points, std.letters):
            v = hplane.boundary_point(th)
            w = g @ v
            assert symspace.projective_distance(w, v) < 1e-9

    def test_inside_arcs(self, std):
        s = F.limit_set(std, 6)
        assert F.limit_arc_check(std, s)
        assert F.boundary_residual(s) < 1e-12

    def test_nested(self, std):
        # pulling a point back by its first letter lands in the arc of the second
        deep = F.limit_set(std, 5)
        L, arcs = std.letters, std.ping_pong.arcs
        for w, th in zip(deep.words, deep.points):
            assert arcs[w[0]].contains(th, 1e-12)
            if len(w) > 1:
                back = hplane.act_boundary(L[std.inverse(w[0])], np.array([th]))[0]
                assert arcs[w[1]].contains(back, 1e-9)

    def test_deterministic(self, std):
        assert np.array_equal(F.limit_set(std, 4).points, F.limit_set(std, 4).points)

    def test_csv(self, std):
        text = F.boundary_csv(F.limit_set(std, 2))
        assert text.startswith("word,angle\r\n") and text.count("\r\n") == 1 + 4 + 12

    def test_gaps_sum_to_span(self, std):
        g = F.limit_gaps(std, 4)
        assert len(g) == 4 + 12 + 36 + 108 - 1
        assert np.all(g >= 0) and g.sum() < 2 * math.pi


class TestCriticalExponent:
    def test_strong_contraction(self, strong):
        ce = F.critical_exponent(strong)
        assert ce.delta_box < 0.2
        assert ce.agreement_gap < 0.05

    def test_powers_decrease(self, std):
        d = [F.critical_exponent(F.power_subgroup(std, n)).delta_orbit for n in (1, 2, 4)]
        assert d[0] > d[1] > d[2]

    def test_conjugation_invariant(self, std):
        h = hplane.h_s(0.3) @ hplane.k_theta(0.4)
        a = F.critical_exponent(std).delta_box
        b = F.critical_exponent(F.conjugate(std, h)).delta_box
        assert abs(a - b) <= 0.02


class TestGeodesics:
    def test_dense_endpoints_in_arcs(self, std):
        L = F.dense_geodesic(std, 3, 200)
        arcs = std.ping_pong.arcs
        assert any(a.contains(L.attract, 1e-12) for a in arcs)
        assert any(a.contains(L.repel, 1e-12) for a in arcs)

    def test_seeds_differ(self, std):
        a, b = F.dense_geodesic(std, 0, 200), F.dense_geodesic(std, 1, 200)
        assert (a.attract, a.repel) != (b.attract, b.repel)

    def test_axis_endpoints(self, std):
        L = F.axis_geodesic(std, 0, 100)
        fa, fr = hplane.fixed_points(std.generators[0])
        assert symspace.projective_distance(hplane.boundary_point(L.attract), fa) < 1e-9
        assert symspace.projective_distance(hplane.boundary_point(L.repel), fr) < 1e-9

    def test_unreduced_coding(self, std):
        with pytest.raises(ValidationError):
            F.coded_geodesic(std, (0, 2, 1), (1, 1))


class TestClosure:
    def test_periodic_is_a_circle(self, std):
        L = F.axis_geodesic(std, 0, 400)
        c = F.closure_sample(std, L, 200.0, 0.01)
        period = hplane.translation_length(std.generators[0]) / hplane.calibration()
        # a closed orbit: frames one period apart agree after reduction
        n = int(round(period / 0.01))
        diffs = np.abs(c.frames[n : 2 * n] - c.frames[:n]).max(axis=(1, 2))
        # the time grid is not commensurate with the period, so agreement is up to one step
        assert diffs.max() < 0.01
        shifted = np.abs(c.frames[n // 2 : n // 2 + n] - c.frames[:n]).max(axis=(1, 2))
        assert shifted.min() > 0.1
        assert c.warnings == 0

    def test_periodic_dimension_one(self, std):
        L = F.axis_geodesic(std, 0, 400)
        c = F.closure_sample(std, L, 100.0, 0.002)
        est = F.closure_dimension(std, c, route="hopf", quotient=True)
        assert est.dimension == pytest.approx(1.0, abs=0.05)

    def test_frames_are_reduced(self, std):
        L = F.dense_geodesic(std, 0, 2000)
        c = F.closure_sample(std, L, 50.0, 0.05)
        B, _ = F.word_ball(std, 1)
        d0 = F.displacement(c.frames)
        for g in B:
            assert np.all(F.displacement(g @ c.frames) >= d0 - 1e-9)

    def test_csv_export(self, std):
        L = F.dense_geodesic(std, 0, 200)
        c = F.closure_sample(std, L, 2.0, 0.5)
        rows = c.to_csv().split("\r\n")
        assert rows[0].startswith("time,m00") and len(rows) == len(c.frames) + 2

    def test_bad_step(self, std):
        with pytest.raises(ValidationError):
            F.closure_sample(std, F.dense_geodesic(std, 0, 200), 1.0, 0.0)


class TestAdmissibility:
    def test_closed_geodesic_projections_finite(self, std):
        L = F.axis_geodesic(std, 0, 400)
        c = F.closure_sample(std, L, 60.0, 0.05)
        rep = F.admissibility_check(std, c, [hplane.k_theta(0.3)])[0]
        assert not rep.rejected
        # finitely many values: zero slope once the points are resolved
        assert rep.dims_plus[-1] == 0.0 and rep.dims_minus[-1] == 0.0

    def test_window_dimensions_segment(self):
        d = F.window_dimensions(np.linspace(0, 1, 5000))
        assert all(abs(x - 1) < 0.1 for x in d)

    def test_scrambled_cloud_unstable(self):
        # dense at coarse scales, sparse at fine ones
        rng = np.random.default_rng(2)
        coarse = rng.uniform(0, 1, 40)
        pts = np.concatenate([c + rng.uniform(0, 1e-3, 100) for c in coarse])
        d = F.window_dimensions(pts)
        assert np.ptp(d) > F.STABILITY_TOL
