"""Neural segment-integral BD estimation with confidence intervals.

A sample series is scaled to the unit square, the integration interval is
split at the sample X values into categorized segments, each category's MLP
predicts a Gaussian over its segment integral, and the per-segment Gaussians
are summed (independent segments: mu adds, sigma^2 adds).  Denormalizing the
unit-square integral back to problem units gives the curve integral estimate;
two curve estimates combine into a BD point estimate with a 3-sigma interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bundle import ModelBundle
from .categories import SegmentCategory
from .core import (
    MODE_BR,
    MODES,
    IntegrationInterval,
    RDCurveSamples,
    XYSeries,
    intersect_intervals,
    project_axes,
    to_log_rate,
)
from .errors import (
    DegenerateSpan,
    ExtrapolationRequired,
    FlatY,
    MetricMismatch,
    TooFewPoints,
)
from .interp import fit_pchip, integrate_fit
from .nn import forward

#: Boundaries closer to a knot than this (normalized X) snap onto the knot.
SNAP_TOL = 1e-9

#: Curves with at least this many points are integrated deterministically.
DENSE_ANCHOR_THRESHOLD = 20


@dataclass(frozen=True)
class NormParams:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def x_span(self) -> float:
        return self.x_max - self.x_min

    @property
    def y_span(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class SegmentInstance:
    category: SegmentCategory
    support_indices: Tuple[int, int, int, int]
    a: float  # integration sub-interval in normalized X
    b: float
    knot_interval: int  # index of the owning knot interval
    boundary: Optional[float] = None

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("segment sub-interval must have a < b")
        if self.category.has_boundary != (self.boundary is not None):
            raise ValueError("boundary value mismatch for category")


@dataclass(frozen=True)
class GaussianEstimate:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("estimate must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class CurveBreakdown:
    source_label: str
    n_points: int
    dense: bool
    degenerate_fallback: bool
    mu: float
    sigma: float
    categories: Tuple[str, ...]


@dataclass(frozen=True)
class BDCIResult:
    mode_tag: str
    mean_delta: float
    sigma_delta: float
    interval_delta: Tuple[float, float]
    interval: IntegrationInterval
    mean_R_percent: Optional[float]
    interval_R_percent: Optional[Tuple[float, float]]
    breakdown: Tuple[CurveBreakdown, ...]
    degenerate_fallback_flag: bool
    method_tag: str = "bdci-mean"


def normalize_series(series: XYSeries) -> Tuple[XYSeries, NormParams]:
    """Affine map of both axes to [0, 1] using the full series' min/max."""
    xs, ys = series.xs, series.ys
    params = NormParams(
        x_min=float(xs[0]),
        x_max=float(xs[-1]),
        y_min=float(np.min(ys)),
        y_max=float(np.max(ys)),
    )
    if params.y_span <= 0.0:
        raise FlatY("series has constant Y; use the analytic constant path")
    xs_n = (xs - params.x_min) / params.x_span
    ys_n = (ys - params.y_min) / params.y_span
    xs_n = np.array(xs_n)
    xs_n[0], xs_n[-1] = 0.0, 1.0
    return XYSeries(xs=xs_n, ys=ys_n, mode_tag=series.mode_tag), params


def _support_indices(interval_idx: int, n: int) -> Tuple[int, int, int, int]:
    if interval_idx == 0:
        start = 0
    elif interval_idx == n - 2:
        start = n - 4
    else:
        start = interval_idx - 1
    return (start, start + 1, start + 2, start + 3)


def _positional_kind(interval_idx: int, n: int) -> str:
    if interval_idx == 0:
        return "first"
    if interval_idx == n - 2:
        return "last"
    return "interior"


_CATEGORY_BY_KIND = {
    ("first", None): SegmentCategory.FIRST_FULL,
    ("interior", None): SegmentCategory.INTERIOR_FULL,
    ("last", None): SegmentCategory.LAST_FULL,
    ("first", "xmin"): SegmentCategory.FIRST_WITH_XMIN,
    ("interior", "xmin"): SegmentCategory.INTERIOR_WITH_XMIN,
    ("interior", "xmax"): SegmentCategory.INTERIOR_WITH_XMAX,
    ("last", "xmax"): SegmentCategory.LAST_WITH_XMAX,
}


def segment_interval(
    xs_norm: Sequence[float], x_lo: float, x_hi: float
) -> List[SegmentInstance]:
    """Split [x_lo, x_hi] at the sample X values into categorized segments.

    Boundaries within SNAP_TOL of a knot snap onto it.  Spans the seven
    categories cannot express (both bounds inside one knot interval, or an
    integration bound strictly inside the outermost interval on its closed
    side) raise DegenerateSpan for the caller's fallback path.
    """
    xs = np.asarray(xs_norm, dtype=float)
    n = len(xs)
    if n < 4:
        raise TooFewPoints(f"segmentation needs >= 4 sample points, got {n}")
    if x_lo < xs[0] - SNAP_TOL or x_hi > xs[-1] + SNAP_TOL:
        raise ExtrapolationRequired(
            f"[{x_lo}, {x_hi}] exceeds the sample span [{xs[0]}, {xs[-1]}]"
        )

    def snap(x: float) -> float:
        k = int(np.argmin(np.abs(xs - x)))
        return float(xs[k]) if abs(xs[k] - x) <= SNAP_TOL else float(x)

    x_lo = snap(x_lo)
    x_hi = snap(x_hi)
    if not x_lo < x_hi:
        raise DegenerateSpan("integration bounds collapse after snapping")

    # knot intervals whose interior intersects (x_lo, x_hi)
    i_lo = min(max(int(np.searchsorted(xs, x_lo, side="right")) - 1, 0), n - 2)
    i_hi = min(max(int(np.searchsorted(xs, x_hi, side="left")) - 1, 0), n - 2)
    if i_hi < i_lo:
        i_hi = i_lo

    segments: List[SegmentInstance] = []
    for i in range(i_lo, i_hi + 1):
        kind = _positional_kind(i, n)
        left_inside = i == i_lo and x_lo > xs[i]
        right_inside = i == i_hi and x_hi < xs[i + 1]
        if left_inside and right_inside:
            raise DegenerateSpan(
                "both integration bounds fall inside one knot interval"
            )
        if left_inside:
            boundary_kind, boundary = "xmin", x_lo
        elif right_inside:
            boundary_kind, boundary = "xmax", x_hi
        else:
            boundary_kind, boundary = None, None
        category = _CATEGORY_BY_KIND.get((kind, boundary_kind))
        if category is None:
            # e.g. X_min inside the last knot interval: not expressible
            raise DegenerateSpan(
                f"no category for a {kind} segment containing {boundary_kind}"
            )
        segments.append(
            SegmentInstance(
                category=category,
                support_indices=_support_indices(i, n),
                a=max(x_lo, float(xs[i])),
                b=min(x_hi, float(xs[i + 1])),
                knot_interval=i,
                boundary=boundary,
            )
        )
    return segments


def build_input(seg: SegmentInstance, series_norm: XYSeries) -> np.ndarray:
    """Interleaved (x, y) of the four support points, plus the boundary."""
    values = []
    for idx in seg.support_indices:
        values.append(float(series_norm.xs[idx]))
        values.append(float(series_norm.ys[idx]))
    if seg.boundary is not None:
        values.append(seg.boundary)
    return np.array(values, dtype=float)


def _interior_full_input(interval_idx: int, series_norm: XYSeries) -> np.ndarray:
    support = _support_indices(interval_idx, series_norm.n)
    values = []
    for idx in support:
        values.append(float(series_norm.xs[idx]))
        values.append(float(series_norm.ys[idx]))
    return np.array(values, dtype=float)


def _predict_normalized(
    series_norm: XYSeries, lo_n: float, hi_n: float, bundle: ModelBundle
):
    """Sum of per-segment Gaussians in normalized coordinates.

    Returns (mu_norm, var_norm, category names, degenerate flag).  On a
    DegenerateSpan the mean comes from closed-form PCHIP integration and the
    sigma from the interior-full model's prediction for the enclosing knot
    interval, scaled by the span fraction.
    """
    try:
        segments = segment_interval(series_norm.xs, lo_n, hi_n)
    except DegenerateSpan:
        interval = IntegrationInterval(lo_n, hi_n)
        mu = integrate_fit(fit_pchip(series_norm), interval)
        i = min(
            max(int(np.searchsorted(series_norm.xs, lo_n, side="right")) - 1, 0),
            series_norm.n - 2,
        )
        model = bundle.model_for(SegmentCategory.INTERIOR_FULL)
        _, log_sigma = forward(model, _interior_full_input(i, series_norm))
        knot_width = float(series_norm.xs[i + 1] - series_norm.xs[i])
        sigma = math.exp(log_sigma) * (hi_n - lo_n) / knot_width
        return float(mu), sigma * sigma, ("degenerate_fallback",), True

    mu_sum = 0.0
    var_sum = 0.0
    names = []
    for seg in segments:
        model = bundle.model_for(seg.category)
        mu_i, log_sigma_i = forward(model, build_input(seg, series_norm))
        sigma_i = math.exp(log_sigma_i)
        mu_sum += mu_i
        var_sum += sigma_i * sigma_i
        names.append(seg.category.value)
    return mu_sum, var_sum, tuple(names), False


def predict_curve_integral(
    series: XYSeries, interval: IntegrationInterval, bundle: ModelBundle
) -> GaussianEstimate:
    """Gaussian estimate of the series' definite integral over the interval."""
    est, _ = _predict_curve_integral_detailed(series, interval, bundle)
    return est


def _predict_curve_integral_detailed(
    series: XYSeries, interval: IntegrationInterval, bundle: ModelBundle
):
    if series.n < 4:
        raise TooFewPoints(f"need >= 4 sample points, got {series.n}")
    ys = series.ys
    if float(np.max(ys)) == float(np.min(ys)):
        mu = float(ys[0]) * interval.width
        return GaussianEstimate(mu=mu, sigma=0.0), {
            "categories": ("flat",),
            "degenerate_fallback": False,
        }
    series_norm, params = normalize_series(series)
    lo_n = (interval.lo - params.x_min) / params.x_span
    hi_n = (interval.hi - params.x_min) / params.x_span
    mu_n, var_n, names, degenerate = _predict_normalized(
        series_norm, lo_n, hi_n, bundle
    )
    scale = params.x_span * params.y_span
    mu = params.y_min * interval.width + scale * mu_n
    sigma = scale * math.sqrt(var_n)
    return GaussianEstimate(mu=mu, sigma=sigma), {
        "categories": names,
        "degenerate_fallback": degenerate,
    }


def _curve_estimate(
    samples: RDCurveSamples,
    mode: str,
    interval: IntegrationInterval,
    bundle: ModelBundle,
    dense_threshold: int,
) -> CurveBreakdown:
    series = project_axes(to_log_rate(samples), mode)
    if samples.n >= dense_threshold:
        mu = integrate_fit(fit_pchip(series), interval)
        return CurveBreakdown(
            source_label=samples.source_label,
            n_points=samples.n,
            dense=True,
            degenerate_fallback=False,
            mu=float(mu),
            sigma=0.0,
            categories=("dense_pchip",),
        )
    est, info = _predict_curve_integral_detailed(series, interval, bundle)
    return CurveBreakdown(
        source_label=samples.source_label,
        n_points=samples.n,
        dense=False,
        degenerate_fallback=info["degenerate_fallback"],
        mu=est.mu,
        sigma=est.sigma,
        categories=info["categories"],
    )


def compute_bdci(
    anchor: RDCurveSamples,
    target: RDCurveSamples,
    mode: str = MODE_BR,
    bundle: ModelBundle = None,
    anchor_dense_threshold: int = DENSE_ANCHOR_THRESHOLD,
) -> BDCIResult:
    """BD point estimate with a 3-sigma confidence interval.

    Curves with at least anchor_dense_threshold points are integrated
    deterministically through PCHIP (sigma = 0); sparse curves go through the
    per-segment neural predictor.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if bundle is None:
        raise ValueError("a trained ModelBundle is required")
    if anchor.metric_name != target.metric_name:
        raise MetricMismatch(
            f"anchor metric {anchor.metric_name!r} != target metric "
            f"{target.metric_name!r}"
        )
    for label, s in (("anchor", anchor), ("target", target)):
        if s.n < 4:
            raise TooFewPoints(f"{label} curve has {s.n} points, needs >= 4")

    series_a = project_axes(to_log_rate(anchor), mode)
    series_b = project_axes(to_log_rate(target), mode)
    interval = intersect_intervals(series_a, series_b)

    est_a = _curve_estimate(anchor, mode, interval, bundle, anchor_dense_threshold)
    est_b = _curve_estimate(target, mode, interval, bundle, anchor_dense_threshold)

    width = interval.width
    mean = (est_b.mu - est_a.mu) / width
    sigma = math.hypot(est_a.sigma, est_b.sigma) / width
    lo, hi = mean - 3.0 * sigma, mean + 3.0 * sigma

    if mode == MODE_BR:
        mean_pct = (math.exp(mean) - 1.0) * 100.0
        interval_pct = ((math.exp(lo) - 1.0) * 100.0, (math.exp(hi) - 1.0) * 100.0)
    else:
        mean_pct = None
        interval_pct = None

    return BDCIResult(
        mode_tag=mode,
        mean_delta=mean,
        sigma_delta=sigma,
        interval_delta=(lo, hi),
        interval=interval,
        mean_R_percent=mean_pct,
        interval_R_percent=interval_pct,
        breakdown=(est_a, est_b),
        degenerate_fallback_flag=est_a.degenerate_fallback or est_b.degenerate_fallback,
    )
