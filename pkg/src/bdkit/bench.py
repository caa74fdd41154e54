"""Evaluation harness: estimation bias, interval calibration, and runtime.

Cases come from synth.build_eval_cases (dense analytic anchor, sparse sampled
target, oracle ground truth).  Accumulation uses numpy pairwise summation so
case order cannot perturb reported MSE.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bundle import ModelBundle
from .classic import CLASSIC_METHODS, compute_bd, compute_bd_dense_anchor
from .core import MODE_BR, MODE_QUALITY
from .errors import BDKitError
from .estimator import compute_bdci
from .synth import build_eval_cases, case_samples

ESTIMATOR_BDCI = "bdci-mean"
ALL_ESTIMATORS = CLASSIC_METHODS + (ESTIMATOR_BDCI,)


@dataclass
class BiasCell:
    errors: List[float] = field(default_factory=list)
    per_n_errors: Dict[int, List[float]] = field(default_factory=dict)
    failures: int = 0
    not_applicable: int = 0

    @property
    def mse(self) -> Optional[float]:
        if not self.errors:
            return None
        arr = np.asarray(self.errors)
        return float(np.sum(arr * arr) / len(arr))

    def per_n_mse(self) -> Dict[int, float]:
        out = {}
        for n, errs in sorted(self.per_n_errors.items()):
            arr = np.asarray(errs)
            out[n] = float(np.sum(arr * arr) / len(arr))
        return out


@dataclass
class BiasReport:
    cells: Dict[Tuple[str, str], BiasCell]
    n_cases: int

    def to_dict(self) -> dict:
        table = {}
        for (estimator, mode), cell in sorted(self.cells.items()):
            table[f"{estimator}/{mode}"] = {
                "mse": cell.mse,
                "count": len(cell.errors),
                "failures": cell.failures,
                "not_applicable": cell.not_applicable,
                "per_n_mse": {str(k): v for k, v in cell.per_n_mse().items()},
            }
        return {"n_cases": self.n_cases, "table": table}

    def format_table(self) -> str:
        lines = [f"{'estimator':<12} {'mode':<8} {'MSE':>14} {'count':>7} {'fail':>5} {'n/a':>5}"]
        for (estimator, mode), cell in sorted(self.cells.items()):
            mse = "-" if cell.mse is None else f"{cell.mse:.6e}"
            lines.append(
                f"{estimator:<12} {mode:<8} {mse:>14} {len(cell.errors):>7} "
                f"{cell.failures:>5} {cell.not_applicable:>5}"
            )
        return "\n".join(lines)


@dataclass
class CalibrationReport:
    outside_fraction: float
    n_cases: int
    n_outside: int
    mean_width_per_n: Dict[int, float]
    median_width_per_n: Dict[int, float]

    def to_dict(self) -> dict:
        return {
            "outside_fraction": self.outside_fraction,
            "n_cases": self.n_cases,
            "n_outside": self.n_outside,
            "mean_width_per_n": {str(k): v for k, v in sorted(self.mean_width_per_n.items())},
            "median_width_per_n": {str(k): v for k, v in sorted(self.median_width_per_n.items())},
        }


def _true_error_scale(case: dict, estimated_delta: float, estimated_pct) -> float:
    """Error in the reported units: Delta R fraction for BR, Delta D otherwise."""
    if case["mode"] == MODE_BR:
        return estimated_pct / 100.0 - case["true_delta_R"]
    return estimated_delta - case["true_delta"]


def eval_bias(
    cases: Sequence[dict],
    estimators: Sequence[str] = ALL_ESTIMATORS,
    modes: Sequence[str] = (MODE_BR, MODE_QUALITY),
    n_values: Optional[Sequence[int]] = None,
    bundle: Optional[ModelBundle] = None,
) -> BiasReport:
    """Squared-error comparison of each estimator against oracle ground truth.

    Akima at n=4 is recorded as not-applicable; other per-case estimator
    failures are counted and excluded from the MSE.
    """
    for est in estimators:
        if est not in ALL_ESTIMATORS:
            raise ValueError(f"unknown estimator {est!r}")
    if ESTIMATOR_BDCI in estimators and bundle is None:
        raise ValueError("bdci-mean evaluation requires a model bundle")

    cells = {(e, m): BiasCell() for e in estimators for m in modes}
    used = 0
    for case in cases:
        mode = case["mode"]
        n = case["n"]
        if mode not in modes:
            continue
        if n_values is not None and n not in n_values:
            continue
        used += 1
        anchor, target = case_samples(case)
        for estimator in estimators:
            cell = cells[(estimator, mode)]
            if estimator == "akima" and n < 5:
                cell.not_applicable += 1
                continue
            try:
                if estimator == ESTIMATOR_BDCI:
                    result = compute_bdci(anchor, target, mode, bundle)
                    err = _true_error_scale(
                        case, result.mean_delta, result.mean_R_percent
                    )
                elif anchor.n >= 20:
                    bd = compute_bd_dense_anchor(anchor, target, mode, estimator)
                    err = _true_error_scale(case, bd.delta_r_or_d, bd.delta_R_percent)
                else:
                    bd = compute_bd(anchor, target, mode, estimator)
                    err = _true_error_scale(case, bd.delta_r_or_d, bd.delta_R_percent)
            except BDKitError:
                cell.failures += 1
                continue
            cell.errors.append(err)
            cell.per_n_errors.setdefault(n, []).append(err)
    return BiasReport(cells=cells, n_cases=used)


def eval_calibration(
    cases: Sequence[dict],
    bundle: ModelBundle,
    n_values: Optional[Sequence[int]] = None,
) -> CalibrationReport:
    """Fraction of cases whose true BD lies outside the 3-sigma BDCI, plus
    interval widths per sample count (widths on the delta scale)."""
    n_outside = 0
    n_total = 0
    widths: Dict[int, List[float]] = {}
    for case in cases:
        n = case["n"]
        if n_values is not None and n not in n_values:
            continue
        anchor, target = case_samples(case)
        result = compute_bdci(anchor, target, case["mode"], bundle)
        lo, hi = result.interval_delta
        truth = case["true_delta"]
        n_total += 1
        if truth < lo or truth > hi:
            n_outside += 1
        widths.setdefault(n, []).append(hi - lo)
    mean_w = {n: float(np.mean(w)) for n, w in widths.items()}
    median_w = {n: float(np.median(w)) for n, w in widths.items()}
    return CalibrationReport(
        outside_fraction=n_outside / n_total if n_total else 0.0,
        n_cases=n_total,
        n_outside=n_outside,
        mean_width_per_n=mean_w,
        median_width_per_n=median_w,
    )


def eval_runtime(
    bundle: ModelBundle,
    n_values: Sequence[int] = (4, 6, 8),
    repetitions: int = 1000,
    seed: int = 2024,
) -> Dict[int, float]:
    """Median wall milliseconds per full BDCI computation, one fixed case
    per sample count, excluding I/O and bundle load."""
    timings: Dict[int, float] = {}
    for n in n_values:
        cases = build_eval_cases(1, seed=seed + n, n_values=[n], modes=[MODE_BR])
        anchor, target = case_samples(cases[0])
        compute_bdci(anchor, target, MODE_BR, bundle)  # warm-up
        samples = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            compute_bdci(anchor, target, MODE_BR, bundle)
            samples.append((time.perf_counter() - t0) * 1000.0)
        timings[n] = float(np.median(samples))
    return timings
