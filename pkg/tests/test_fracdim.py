import math

import numpy as np
import pytest

from xlab import fracdim, hplane, symspace
from xlab.errors import ValidationError

LOG2_LOG3 = math.log(2) / math.log(3)


def sym_metric(p, Q):
    return symspace.distance_batch(p, np.asarray(Q))


class TestCalibration:
    def test_cantor(self):
        est = fracdim.box_dimension(fracdim.cantor_points(12))
        assert est.slope == pytest.approx(LOG2_LOG3, abs=0.03)

    def test_segment(self):
        assert fracdim.box_dimension(fracdim.segment_points(4000)).slope == pytest.approx(1.0, abs=0.03)

    def test_quarter_ifs(self):
        assert fracdim.box_dimension(fracdim.ifs_points(0.25, 12)).slope == pytest.approx(0.5, abs=0.03)

    def test_gaps_route_matches(self):
        x = fracdim.cantor_points(12)[:, 0]
        a = fracdim.box_dimension_gaps(np.diff(x))
        assert a.slope == pytest.approx(LOG2_LOG3, abs=0.03)


class TestEstimatorProperties:
    def test_fit_is_least_squares_on_window(self):
        est = fracdim.box_dimension(fracdim.cantor_points(10))
        lo, hi = est.window
        sel = [(s, c) for s, c in est.counts if lo <= s <= hi]
        x = np.log([1 / s for s, _ in sel])
        y = np.log([c for _, c in sel])
        assert est.slope == pytest.approx(np.polyfit(x, y, 1)[0], rel=1e-9)
        assert 0.0 <= est.r2 <= 1.0
        assert len(sel) >= fracdim.MIN_WINDOW

    def test_scale_invariance(self):
        P = fracdim.ifs_points(1 / 3, 11)
        a = fracdim.box_dimension(P)
        b = fracdim.box_dimension(7.5 * P)
        assert abs(a.slope - b.slope) <= 0.01

    def test_subsample_monotone(self):
        rng = np.random.default_rng(0)
        P = fracdim.cantor_points(12)
        sub = P[np.sort(rng.choice(len(P), 1500, replace=False))]
        assert fracdim.box_dimension(sub).slope <= fracdim.box_dimension(P).slope + 0.05

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            fracdim.box_dimension(fracdim.segment_points(100))

    def test_short_scale_span(self):
        with pytest.raises(ValidationError):
            fracdim.box_dimension(fracdim.segment_points(2000), scales=np.logspace(0, -1, 10))

    def test_too_few_scales(self):
        with pytest.raises(ValidationError):
            fracdim.box_dimension(fracdim.segment_points(2000), scales=np.logspace(0, -3, 5))

    def test_json_roundtrip(self):
        est = fracdim.box_dimension(fracdim.segment_points(2000))
        assert fracdim.DimEstimate.from_json(est.to_json()) == est

    def test_counts_csv(self):
        est = fracdim.box_dimension(fracdim.segment_points(2000))
        lines = est.counts_csv().split("\r\n")
        assert lines[0] == "scale,count" and len(lines) == len(est.counts) + 2

    def test_callable_metric(self):
        pts = [symspace.point_of(hplane.a_t(t)) for t in np.linspace(0, 1, 1200)]
        scales = fracdim.geometric_scales(0.5, 2.5, 21)
        est = fracdim.box_dimension(pts, metric=sym_metric, scales=scales)
        assert est.slope == pytest.approx(1.0, abs=0.05)


class TestNets:
    def test_greedy_net_covers(self):
        P = np.random.default_rng(1).uniform(size=(2000, 2))
        c = fracdim.greedy_net(P, 0.1)
        d = np.abs(P[:, None, :] - P[c][None, :, :]).max(axis=2).min(axis=1)
        assert d.max() <= 0.1
        assert np.abs(P[c][:, None] - P[c][None]).max(axis=2)[~np.eye(len(c), dtype=bool)].min() > 0.1

    def test_net_count_gaps_matches(self):
        x = np.sort(np.random.default_rng(2).uniform(size=500))
        assert fracdim.net_count_gaps(np.diff(x), 0.05) == fracdim.net_count(x[:, None], 0.05)

    def test_fit_window(self):
        counts = [(10.0**-k, int(10 ** (2 * k))) for k in range(5)]
        assert fracdim.fit_window(counts, (1e-3, 1.0)).slope == pytest.approx(2.0)


class TestHausdorffDistance:
    def test_identical(self):
        A = np.random.default_rng(3).normal(size=(50, 3))
        assert fracdim.hausdorff_distance(A, A) == 0.0

    def test_singletons(self):
        a = [np.eye(3)]
        b = [symspace.point_of(hplane.a_t(0.7))]
        assert fracdim.hausdorff_distance(a, b, sym_metric) == pytest.approx(math.sqrt(6) * 0.7)

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            A, B = rng.normal(size=(30, 2)), rng.normal(size=(40, 2))
            assert fracdim.hausdorff_distance(A, B) == fracdim.hausdorff_distance(B, A)

    def test_empty(self):
        with pytest.raises(ValidationError):
            fracdim.hausdorff_distance(np.zeros((0, 2)), np.zeros((3, 2)))


class TestProductCheck:
    def test_cantor_times_square(self):
        # same-window fits; the core mask removes the edge of the square
        rng = np.random.default_rng(0)
        c = fracdim.cantor_points(10)[:, 0]
        n = 400_000
        P = np.column_stack([rng.choice(c, n), rng.uniform(size=(n, 2))])
        core = np.all((P[:, 1:] > 0.25) & (P[:, 1:] < 0.75), axis=1)
        scales = 0.25 * 3.0 ** -np.arange(0, 2.51, 0.25)
        window = (scales[-1], scales[0])
        prod = fracdim.fit_window(fracdim.net_counts(P, scales, "chebyshev", core=core), window)
        base = fracdim.fit_window(fracdim.net_counts(fracdim.cantor_points(12), scales, "chebyshev"), window)
        r = fracdim.product_dimension_check(base, 2.0, prod)
        assert abs(r.residual) <= 0.1

    def test_sandwich_flags(self):
        base = fracdim.DimEstimate(1.0, 1.0, (0.1, 1.0), [])
        prod = fracdim.DimEstimate(3.0, 1.0, (0.1, 1.0), [])
        r = fracdim.product_dimension_check(base, 2.0, prod)
        assert r.lower_ok and r.upper_ok and r.residual == 0.0
        low = fracdim.product_dimension_check(base, 2.0, fracdim.DimEstimate(2.5, 1.0, (0.1, 1.0), []))
        assert not low.lower_ok and low.upper_ok
        high = fracdim.product_dimension_check(base, 2.0, fracdim.DimEstimate(3.5, 1.0, (0.1, 1.0), []))
        assert high.lower_ok and not high.upper_ok
