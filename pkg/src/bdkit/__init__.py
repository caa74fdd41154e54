"""bdkit: Bjontegaard Delta metrics with neural confidence intervals."""

__version__ = "0.1.0"

from .bundle import ModelBundle, load_bundle, save_bundle
from .classic import compute_bd, compute_bd_dense_anchor
from .core import (
    MODE_BR,
    MODE_QUALITY,
    BDValue,
    IntegrationInterval,
    RDCurveSamples,
    XYSeries,
    delta_from_integrals,
    intersect_intervals,
    project_axes,
    to_log_rate,
    validate_samples,
)
from .estimator import BDCIResult, GaussianEstimate, compute_bdci, predict_curve_integral

__all__ = [
    "MODE_BR",
    "MODE_QUALITY",
    "BDValue",
    "BDCIResult",
    "GaussianEstimate",
    "IntegrationInterval",
    "ModelBundle",
    "RDCurveSamples",
    "XYSeries",
    "compute_bd",
    "compute_bd_dense_anchor",
    "compute_bdci",
    "delta_from_integrals",
    "intersect_intervals",
    "load_bundle",
    "predict_curve_integral",
    "project_axes",
    "save_bundle",
    "to_log_rate",
    "validate_samples",
]
