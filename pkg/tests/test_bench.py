import numpy as np
import pytest

from bdkit.bench import (
    ALL_ESTIMATORS,
    BiasReport,
    eval_bias,
    eval_calibration,
    eval_runtime,
)
from bdkit.core import MODE_BR, MODE_QUALITY
from bdkit.synth import FAMILIES, build_eval_cases, gen_curve


def identical_curve_cases(num, dense_n=50):
    """Cases where anchor and target are the same densely sampled curve, so
    the true BD and every consistent estimate are exactly zero."""
    cases = []
    seed = 0
    while len(cases) < num:
        seed += 1
        curve = gen_curve(FAMILIES[seed % 4], seed + 500, direction=1)
        lo, hi = curve.domain
        xs = np.linspace(lo, hi, dense_n)
        ys = np.asarray(curve.y(xs), dtype=float)
        if float(np.max(np.abs(ys))) > 50.0:
            continue
        xy = [xs.tolist(), ys.tolist()]
        cases.append(
            {
                "kind": "case",
                "case_id": f"ident-{seed}",
                "seed": seed,
                "mode": MODE_BR,
                "n": dense_n,
                "target_curve": curve.to_dict(),
                "anchor_curve": curve.to_dict(),
                "target_xy": xy,
                "anchor_xy": xy,
                "interval": [lo, hi],
                "true_delta": 0.0,
                "true_delta_R": 0.0,
            }
        )
    return cases


class TestEvalBias:
    def test_identical_curves_score_zero(self, zero_bundle):
        cases = identical_curve_cases(10)
        report = eval_bias(
            cases, estimators=("pchip", "bdci-mean"), bundle=zero_bundle
        )
        assert report.n_cases == 10
        for key in (("pchip", MODE_BR), ("bdci-mean", MODE_BR)):
            cell = report.cells[key]
            assert cell.failures == 0
            assert cell.mse is not None and cell.mse <= 1e-20

    def test_pchip_error_shrinks_with_density(self):
        cases = build_eval_cases(500, seed=1, n_values=[4, 8], modes=[MODE_BR])
        report = eval_bias(cases, estimators=("pchip",), modes=(MODE_BR,))
        per_n = report.cells[("pchip", MODE_BR)].per_n_mse()
        assert set(per_n) == {4, 8}
        assert per_n[8] < per_n[4]

    def test_akima_not_applicable_at_four_points(self, zero_bundle):
        cases = build_eval_cases(30, seed=2, n_values=[4], modes=[MODE_BR])
        report = eval_bias(cases, estimators=("akima",), modes=(MODE_BR,))
        cell = report.cells[("akima", MODE_BR)]
        assert cell.not_applicable == 30
        assert cell.mse is None

    def test_bdci_requires_bundle(self):
        with pytest.raises(ValueError):
            eval_bias([], estimators=("bdci-mean",))

    def test_unknown_estimator_rejected(self):
        with pytest.raises(ValueError):
            eval_bias([], estimators=("cubic", "nope"))

    def test_report_serializes(self, zero_bundle):
        cases = build_eval_cases(20, seed=3)
        report = eval_bias(cases, bundle=zero_bundle)
        doc = report.to_dict()
        assert doc["n_cases"] == 20
        assert set(doc["table"]) == {
            f"{e}/{m}" for e in ALL_ESTIMATORS for m in (MODE_BR, MODE_QUALITY)
        }
        table = report.format_table()
        assert "estimator" in table and "bdci-mean" in table

    def test_n_filter(self, zero_bundle):
        cases = build_eval_cases(40, seed=4, n_values=[4, 8])
        full = eval_bias(cases, estimators=("pchip",))
        only4 = eval_bias(cases, estimators=("pchip",), n_values=[4])
        assert only4.n_cases < full.n_cases
        assert only4.n_cases == sum(1 for c in cases if c["n"] == 4)


class TestEvalCalibration:
    def test_zero_bundle_intervals_cover_everything(self, zero_bundle):
        # untrained sigma=1 per normalized segment gives huge intervals, so
        # no truth should fall outside the 3-sigma band
        cases = build_eval_cases(40, seed=5, n_values=[4, 6, 8])
        report = eval_calibration(cases, zero_bundle)
        assert report.n_cases == 40
        assert report.n_outside == 0
        assert report.outside_fraction == 0.0
        for n, width in report.mean_width_per_n.items():
            assert width > 0.0
            assert report.median_width_per_n[n] > 0.0

    def test_counts_consistent(self, zero_bundle):
        cases = build_eval_cases(30, seed=6)
        report = eval_calibration(cases, zero_bundle)
        assert 0.0 <= report.outside_fraction <= 1.0
        assert report.n_outside == round(report.outside_fraction * report.n_cases)

    def test_n_filter(self, zero_bundle):
        cases = build_eval_cases(30, seed=7, n_values=[4, 8])
        report = eval_calibration(cases, zero_bundle, n_values=[8])
        assert set(report.mean_width_per_n) == {8}


class TestEvalRuntime:
    def test_returns_positive_medians(self, toy_bundle):
        timings = eval_runtime(toy_bundle, n_values=(4, 8), repetitions=20)
        assert set(timings) == {4, 8}
        for ms in timings.values():
            assert 0.0 < ms < 1000.0
