"""End-to-end classical BD pipeline: log transform, projection, fit,
interval intersection, closed-form integration, delta."""
from __future__ import annotations

from .core import (
    MODE_BR,
    BDValue,
    RDCurveSamples,
    delta_from_integrals,
    intersect_intervals,
    project_axes,
    to_log_rate,
)
from .errors import MetricMismatch, TooFewPoints
from .interp import fit_akima, fit_csi, fit_cubic_ls, fit_pchip, integrate_fit

METHOD_CUBIC = "cubic"
METHOD_CSI = "csi"
METHOD_PCHIP = "pchip"
METHOD_AKIMA = "akima"
CLASSIC_METHODS = (METHOD_CUBIC, METHOD_CSI, METHOD_PCHIP, METHOD_AKIMA)

_FITTERS = {
    METHOD_CUBIC: fit_cubic_ls,
    METHOD_CSI: fit_csi,
    METHOD_PCHIP: fit_pchip,
    METHOD_AKIMA: fit_akima,
}

_MIN_POINTS = {
    METHOD_CUBIC: 4,
    METHOD_CSI: 4,
    METHOD_PCHIP: 4,
    METHOD_AKIMA: 5,
}


def _check_pair(anchor: RDCurveSamples, target: RDCurveSamples):
    if anchor.metric_name != target.metric_name:
        raise MetricMismatch(
            f"anchor metric {anchor.metric_name!r} != target metric "
            f"{target.metric_name!r}"
        )


def _require_points(samples: RDCurveSamples, minimum: int, label: str):
    if samples.n < minimum:
        raise TooFewPoints(
            f"{label} curve has {samples.n} points, needs >= {minimum}"
        )


def compute_bd(
    anchor: RDCurveSamples,
    target: RDCurveSamples,
    mode: str = MODE_BR,
    method: str = METHOD_PCHIP,
) -> BDValue:
    """Classical BD between a target and an anchor curve.

    Each curve is fitted over its own full sample range; clipping to the
    shared interval happens only at integration time.
    """
    if method not in _FITTERS:
        raise ValueError(f"unknown method {method!r}")
    _check_pair(anchor, target)
    minimum = _MIN_POINTS[method]
    _require_points(anchor, minimum, "anchor")
    _require_points(target, minimum, "target")

    fitter = _FITTERS[method]
    series_a = project_axes(to_log_rate(anchor), mode)
    series_b = project_axes(to_log_rate(target), mode)
    interval = intersect_intervals(series_a, series_b)
    integral_a = integrate_fit(fitter(series_a), interval)
    integral_b = integrate_fit(fitter(series_b), interval)
    return delta_from_integrals(integral_b, integral_a, interval, mode, method)


def compute_bd_dense_anchor(
    anchor_dense: RDCurveSamples,
    target: RDCurveSamples,
    mode: str = MODE_BR,
    method: str = METHOD_PCHIP,
) -> BDValue:
    """Classical BD with a dense anchor curve integrated through PCHIP.

    The chosen method applies to the sparse target only; the anchor integral
    always comes from a PCHIP fit through all dense anchor points.
    """
    if method not in _FITTERS:
        raise ValueError(f"unknown method {method!r}")
    _check_pair(anchor_dense, target)
    _require_points(anchor_dense, 20, "dense anchor")
    _require_points(target, _MIN_POINTS[method], "target")

    series_a = project_axes(to_log_rate(anchor_dense), mode)
    series_b = project_axes(to_log_rate(target), mode)
    interval = intersect_intervals(series_a, series_b)
    integral_a = integrate_fit(fit_pchip(series_a), interval)
    integral_b = integrate_fit(_FITTERS[method](series_b), interval)
    return delta_from_integrals(integral_b, integral_a, interval, mode, method)
