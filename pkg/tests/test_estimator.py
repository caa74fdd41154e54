import math

import numpy as np
import pytest

from bdkit.categories import SegmentCategory
from bdkit.core import (
    MODE_BR,
    MODE_QUALITY,
    IntegrationInterval,
    XYSeries,
    validate_samples,
)
from bdkit.errors import (
    DegenerateSpan,
    ExtrapolationRequired,
    FlatY,
    MetricMismatch,
    TooFewPoints,
)
from bdkit.estimator import (
    SNAP_TOL,
    build_input,
    compute_bdci,
    normalize_series,
    predict_curve_integral,
    segment_interval,
    _predict_curve_integral_detailed,
)


def series(xs, ys, mode=MODE_BR):
    return XYSeries(xs=np.asarray(xs, float), ys=np.asarray(ys, float), mode_tag=mode)


FIVE_X = [0.0, 0.25, 0.5, 0.75, 1.0]


class TestNormalize:
    def test_unit_square_mapping(self):
        s = series([10.0, 20.0, 30.0, 40.0], [2.0, 4.0, 5.0, 6.0])
        norm, params = normalize_series(s)
        assert list(norm.xs) == [0.0, 1 / 3, 2 / 3, 1.0]
        assert list(norm.ys) == [0.0, 0.5, 0.75, 1.0]
        assert (params.x_min, params.x_max) == (10.0, 40.0)
        assert (params.y_min, params.y_max) == (2.0, 6.0)

    def test_endpoints_exact(self):
        # endpoints must be exactly 0 and 1 even when division is inexact
        s = series([0.1, 0.2, 0.4, 0.7], [1.0, 2.0, 3.0, 4.0])
        norm, _ = normalize_series(s)
        assert norm.xs[0] == 0.0 and norm.xs[-1] == 1.0

    def test_decreasing_y_allowed(self):
        s = series([0.0, 1.0, 2.0, 3.0], [9.0, 6.0, 4.0, 1.0])
        norm, _ = normalize_series(s)
        assert norm.ys[0] == 1.0 and norm.ys[-1] == 0.0

    def test_flat_y_rejected(self):
        with pytest.raises(FlatY):
            normalize_series(series([0.0, 1.0, 2.0, 3.0], [5.0, 5.0, 5.0, 5.0]))

    def test_affine_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            xs = np.sort(rng.uniform(0, 100, 6))
            while np.min(np.diff(xs)) < 1e-6:
                xs = np.sort(rng.uniform(0, 100, 6))
            ys = rng.normal(size=6)
            ys[-1] = ys[0] + 1.0  # guarantee nonzero span
            base, _ = normalize_series(series(xs, ys))
            ax, bx = rng.uniform(0.1, 5.0), rng.uniform(-10, 10)
            ay, by = rng.uniform(0.1, 5.0), rng.uniform(-10, 10)
            mapped, _ = normalize_series(series(ax * xs + bx, ay * ys + by))
            assert np.allclose(base.xs, mapped.xs, atol=1e-12)
            assert np.allclose(base.ys, mapped.ys, atol=1e-12)


class TestSegmentation:
    def test_full_span(self):
        segs = segment_interval(FIVE_X, 0.0, 1.0)
        assert [s.category for s in segs] == [
            SegmentCategory.FIRST_FULL,
            SegmentCategory.INTERIOR_FULL,
            SegmentCategory.INTERIOR_FULL,
            SegmentCategory.LAST_FULL,
        ]
        assert segs[0].support_indices == (0, 1, 2, 3)
        assert segs[1].support_indices == (0, 1, 2, 3)
        assert segs[2].support_indices == (1, 2, 3, 4)
        assert segs[3].support_indices == (1, 2, 3, 4)
        assert all(s.boundary is None for s in segs)
        assert [(s.a, s.b) for s in segs] == [
            (0.0, 0.25),
            (0.25, 0.5),
            (0.5, 0.75),
            (0.75, 1.0),
        ]

    def test_partial_span_boundaries(self):
        segs = segment_interval(FIVE_X, 0.1, 0.8)
        assert [s.category for s in segs] == [
            SegmentCategory.FIRST_WITH_XMIN,
            SegmentCategory.INTERIOR_FULL,
            SegmentCategory.INTERIOR_FULL,
            SegmentCategory.LAST_WITH_XMAX,
        ]
        assert segs[0].boundary == 0.1 and segs[0].a == 0.1
        assert segs[-1].boundary == 0.8 and segs[-1].b == 0.8

    def test_interior_boundaries(self):
        xs = np.linspace(0.0, 1.0, 7)  # knots every 1/6
        segs = segment_interval(xs, 0.2, 0.7)
        assert segs[0].category == SegmentCategory.INTERIOR_WITH_XMIN
        assert segs[0].knot_interval == 1
        assert segs[-1].category == SegmentCategory.INTERIOR_WITH_XMAX
        assert segs[-1].knot_interval == 4
        for s in segs[1:-1]:
            assert s.category == SegmentCategory.INTERIOR_FULL

    def test_segments_tile_the_interval(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            n = int(rng.integers(4, 12))
            xs = np.sort(rng.uniform(0, 1, n))
            xs[0], xs[-1] = 0.0, 1.0
            if np.min(np.diff(xs)) < 1e-3:
                continue
            lo, hi = np.sort(rng.uniform(0, 1, 2))
            if hi - lo < 1e-3:
                continue
            try:
                segs = segment_interval(xs, lo, hi)
            except DegenerateSpan:
                continue
            assert segs[0].a == pytest.approx(lo, abs=SNAP_TOL)
            assert segs[-1].b == pytest.approx(hi, abs=SNAP_TOL)
            for left, right in zip(segs, segs[1:]):
                assert left.b == right.a

    def test_boundary_snaps_to_knot(self):
        segs = segment_interval(FIVE_X, 0.25 + 1e-12, 1.0)
        assert segs[0].category == SegmentCategory.INTERIOR_FULL
        assert segs[0].a == 0.25
        assert segs[0].boundary is None

    def test_degenerate_single_interval(self):
        with pytest.raises(DegenerateSpan):
            segment_interval(FIVE_X, 0.3, 0.4)

    def test_degenerate_xmin_in_last_interval(self):
        with pytest.raises(DegenerateSpan):
            segment_interval(FIVE_X, 0.8, 1.0)

    def test_degenerate_xmax_in_first_interval(self):
        with pytest.raises(DegenerateSpan):
            segment_interval(FIVE_X, 0.0, 0.2)

    def test_collapsed_bounds(self):
        with pytest.raises(DegenerateSpan):
            segment_interval(FIVE_X, 0.5 - 1e-12, 0.5 + 1e-12)

    def test_extrapolation_rejected(self):
        with pytest.raises(ExtrapolationRequired):
            segment_interval(FIVE_X, -0.1, 0.8)
        with pytest.raises(ExtrapolationRequired):
            segment_interval(FIVE_X, 0.1, 1.1)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            segment_interval([0.0, 0.5, 1.0], 0.0, 1.0)

    def test_six_point_interior_supports(self):
        xs = np.linspace(0, 1, 6)
        segs = segment_interval(xs, 0.0, 1.0)
        assert [s.support_indices for s in segs] == [
            (0, 1, 2, 3),
            (0, 1, 2, 3),
            (1, 2, 3, 4),
            (2, 3, 4, 5),
            (2, 3, 4, 5),
        ]


class TestBuildInput:
    def test_full_category_width_eight(self):
        norm, _ = normalize_series(series(FIVE_X, [0.0, 0.3, 0.5, 0.8, 1.0]))
        segs = segment_interval(norm.xs, 0.0, 1.0)
        vec = build_input(segs[1], norm)
        assert vec.shape == (8,)
        assert list(vec) == [0.0, 0.0, 0.25, 0.3, 0.5, 0.5, 0.75, 0.8]

    def test_boundary_category_width_nine(self):
        norm, _ = normalize_series(series(FIVE_X, [0.0, 0.3, 0.5, 0.8, 1.0]))
        segs = segment_interval(norm.xs, 0.1, 0.8)
        vec = build_input(segs[0], norm)
        assert vec.shape == (9,)
        assert vec[-1] == 0.1

    def test_input_width_matches_category(self):
        norm, _ = normalize_series(
            series(np.linspace(0, 1, 8), np.linspace(0, 1, 8) ** 2)
        )
        for seg in segment_interval(norm.xs, 0.05, 0.95):
            assert build_input(seg, norm).shape == (seg.category.input_size,)


class TestPredictCurveIntegral:
    def test_zero_bundle_denormalization(self, zero_bundle):
        # zero weights: each segment contributes mu'=0, sigma'=1, so the
        # denormalized estimate is y_min*width and sigma = spans * sqrt(k)
        xs = [10.0, 20.0, 30.0, 40.0, 50.0]
        ys = [3.0, 4.0, 4.5, 5.5, 7.0]
        s = series(xs, ys)
        est = predict_curve_integral(s, IntegrationInterval(10.0, 50.0), zero_bundle)
        assert est.mu == pytest.approx(3.0 * 40.0, abs=1e-12)
        assert est.sigma == pytest.approx(40.0 * 4.0 * math.sqrt(4), rel=1e-12)

    def test_flat_series_short_circuit(self, zero_bundle):
        s = series([0.0, 1.0, 2.0, 3.0], [5.0, 5.0, 5.0, 5.0])
        est = predict_curve_integral(s, IntegrationInterval(0.5, 2.5), zero_bundle)
        assert est.mu == 5.0 * 2.0
        assert est.sigma == 0.0

    def test_too_few_points(self, zero_bundle):
        s = series([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(TooFewPoints):
            predict_curve_integral(s, IntegrationInterval(0.0, 2.0), zero_bundle)

    def test_degenerate_fallback_engages(self, toy_bundle):
        # a span inside a single knot interval uses the closed-form fallback
        s = series([0.0, 1.0, 2.0, 3.0], [0.0, 0.9, 1.7, 2.2])
        est, info = _predict_curve_integral_detailed(
            s, IntegrationInterval(1.2, 1.8), toy_bundle
        )
        assert info["degenerate_fallback"]
        assert info["categories"] == ("degenerate_fallback",)
        assert est.sigma > 0.0

    def test_estimate_finite_on_random_series(self, toy_bundle):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(4, 9))
            xs = np.sort(rng.uniform(0, 10, n))
            if np.min(np.diff(xs)) < 1e-3:
                continue
            ys = np.cumsum(rng.uniform(0.1, 1.0, n))
            lo = xs[0] + 0.3 * (xs[-1] - xs[0])
            hi = xs[0] + 0.9 * (xs[-1] - xs[0])
            est = predict_curve_integral(
                series(xs, ys), IntegrationInterval(lo, hi), toy_bundle
            )
            assert math.isfinite(est.mu) and est.sigma >= 0.0


def rd_samples(rates, quals, label="x", metric="psnr"):
    return validate_samples(list(zip(rates, quals)), metric, label)


RATES = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
QUALS = np.array([30.0, 33.0, 35.5, 37.0, 38.0])


class TestComputeBDCI:
    def test_identical_curves_centered_at_zero(self, toy_bundle):
        a = rd_samples(RATES, QUALS)
        res = compute_bdci(a, a, MODE_BR, toy_bundle)
        assert res.mean_delta == pytest.approx(0.0, abs=1e-12)
        assert res.mean_R_percent == pytest.approx(0.0, abs=1e-10)
        # identical inputs: combined sigma is sqrt(2) times one curve's
        sigma_curve = res.breakdown[0].sigma / res.interval.width
        assert res.sigma_delta == pytest.approx(
            math.sqrt(2) * sigma_curve, rel=1e-12
        )
        lo, hi = res.interval_delta
        assert lo == pytest.approx(-3 * res.sigma_delta, rel=1e-12)
        assert hi == pytest.approx(3 * res.sigma_delta, rel=1e-12)

    def test_antisymmetry(self, toy_bundle):
        a = rd_samples(RATES, QUALS, label="a")
        b = rd_samples(RATES * 0.8, QUALS + 0.3, label="b")
        ab = compute_bdci(a, b, MODE_BR, toy_bundle)
        ba = compute_bdci(b, a, MODE_BR, toy_bundle)
        assert ab.mean_delta == pytest.approx(-ba.mean_delta, abs=1e-12)
        assert ab.sigma_delta == pytest.approx(ba.sigma_delta, rel=1e-12)

    def test_quality_mode_has_no_percent(self, toy_bundle):
        a = rd_samples(RATES, QUALS)
        res = compute_bdci(a, a, MODE_QUALITY, toy_bundle)
        assert res.mean_R_percent is None
        assert res.interval_R_percent is None

    def test_br_percent_interval_is_exp_mapped(self, toy_bundle):
        a = rd_samples(RATES, QUALS, label="a")
        b = rd_samples(RATES * 0.9, QUALS, label="b")
        res = compute_bdci(a, b, MODE_BR, toy_bundle)
        lo, hi = res.interval_delta
        plo, phi = res.interval_R_percent
        assert plo == pytest.approx((math.exp(lo) - 1) * 100, rel=1e-12)
        assert phi == pytest.approx((math.exp(hi) - 1) * 100, rel=1e-12)
        assert plo < res.mean_R_percent < phi

    def test_dense_anchor_contributes_zero_sigma(self, toy_bundle):
        xs = np.linspace(30.0, 38.0, 25)
        rates = np.exp(0.3 * xs - 8.0)
        dense = rd_samples(rates, xs, label="dense")
        sparse = rd_samples(RATES, QUALS, label="sparse")
        res = compute_bdci(dense, sparse, MODE_BR, toy_bundle)
        assert res.breakdown[0].dense
        assert res.breakdown[0].sigma == 0.0
        assert res.breakdown[0].categories == ("dense_pchip",)
        assert not res.breakdown[1].dense
        assert res.sigma_delta == pytest.approx(
            res.breakdown[1].sigma / res.interval.width, rel=1e-12
        )

    def test_metric_mismatch(self, toy_bundle):
        a = rd_samples(RATES, QUALS, metric="psnr")
        b = rd_samples(RATES, QUALS, metric="vmaf")
        with pytest.raises(MetricMismatch):
            compute_bdci(a, b, MODE_BR, toy_bundle)

    def test_requires_bundle(self):
        a = rd_samples(RATES, QUALS)
        with pytest.raises(ValueError):
            compute_bdci(a, a, MODE_BR, None)

    def test_too_few_points(self, toy_bundle):
        a = rd_samples(RATES, QUALS)
        b = rd_samples(RATES[:3], QUALS[:3])
        with pytest.raises(TooFewPoints):
            compute_bdci(a, b, MODE_BR, toy_bundle)
