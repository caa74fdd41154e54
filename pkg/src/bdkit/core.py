"""Rate-distortion domain types and the arithmetic behind BD values.

Everything here is a pure function over immutable inputs: the arrays held by
the dataclasses are marked read-only at construction time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DuplicateRate,
    DuplicateX,
    EmptyIntersection,
    NonFiniteQuality,
    NonMonotoneQuality,
    NonPositiveRate,
    TooFewPoints,
)

MODE_BR = "br"
MODE_QUALITY = "quality"
MODES = (MODE_BR, MODE_QUALITY)

#: Relative tolerance used to distinguish genuine ties from float noise.
REL_TIE_TOL = 1e-12


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RDPoint:
    rate: float
    quality: float


@dataclass(frozen=True)
class RDCurveSamples:
    """Ordered (rate, quality) samples for one codec on one content item.

    ``quality_direction`` is +1 when quality increases with rate and -1 when
    it decreases (distortion-style metrics such as LPIPS or RMSE).
    ``log_rates`` marks a curve whose rates have already been replaced by
    their natural logarithm.
    """

    rates: np.ndarray
    qualities: np.ndarray
    metric_name: str
    source_label: str
    quality_direction: int
    log_rates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rates", _readonly(self.rates))
        object.__setattr__(self, "qualities", _readonly(self.qualities))

    @property
    def n(self) -> int:
        return len(self.rates)

    def points(self) -> Tuple[RDPoint, ...]:
        return tuple(RDPoint(r, q) for r, q in zip(self.rates, self.qualities))


@dataclass(frozen=True)
class XYSeries:
    """Axis-projected points ready for integration.

    X is quality for BD-BR and log-rate for BD-quality; xs must be strictly
    increasing.
    """

    xs: np.ndarray
    ys: np.ndarray
    mode_tag: str

    def __post_init__(self):
        xs = _readonly(self.xs)
        ys = _readonly(self.ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if len(xs) != len(ys):
            raise ValueError("xs and ys must have the same length")
        if len(xs) < 2:
            raise TooFewPoints(f"need at least 2 points, got {len(xs)}")
        span = xs[-1] - xs[0]
        tol = REL_TIE_TOL * max(abs(span), 1.0)
        if np.any(np.diff(xs) <= tol):
            raise DuplicateX("x values must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def x_span(self) -> Tuple[float, float]:
        return float(self.xs[0]), float(self.xs[-1])


@dataclass(frozen=True)
class IntegrationInterval:
    lo: float
    hi: float

    def __post_init__(self):
        width = self.hi - self.lo
        tol = REL_TIE_TOL * max(abs(self.lo), abs(self.hi), 1.0)
        if not width > tol:
            raise EmptyIntersection(
                f"degenerate interval [{self.lo}, {self.hi}]"
            )

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class BDValue:
    delta_r_or_d: float
    delta_R_percent: Optional[float]
    interval: IntegrationInterval
    mode_tag: str
    method_tag: str


def validate_samples(
    raw_points: Sequence[Tuple[float, float]],
    metric_name: str = "",
    source_label: str = "",
) -> RDCurveSamples:
    """Sort, validate and package raw (rate, quality) pairs.

    Raises NonPositiveRate, NonFiniteQuality, DuplicateRate,
    NonMonotoneQuality or TooFewPoints on bad input.
    """
    pts = list(raw_points)
    if len(pts) < 2:
        raise TooFewPoints(f"need at least 2 points, got {len(pts)}")
    rates = np.array([p[0] for p in pts], dtype=float)
    quals = np.array([p[1] for p in pts], dtype=float)
    if np.any(~np.isfinite(rates)) or np.any(rates <= 0):
        raise NonPositiveRate("all rates must be positive and finite")
    if np.any(~np.isfinite(quals)):
        raise NonFiniteQuality("all qualities must be finite")

    order = np.argsort(rates, kind="stable")
    rates = rates[order]
    quals = quals[order]

    rate_span = rates[-1] - rates[0]
    if np.any(np.diff(rates) <= REL_TIE_TOL * max(rate_span, 1.0)):
        raise DuplicateRate("two rates coincide within tolerance")

    dq = np.diff(quals)
    qual_span = float(np.max(quals) - np.min(quals))
    tie_tol = REL_TIE_TOL * max(qual_span, 1.0)
    if np.any(np.abs(dq) <= tie_tol):
        raise NonMonotoneQuality("adjacent qualities coincide within tolerance")
    if np.all(dq > 0):
        direction = 1
    elif np.all(dq < 0):
        direction = -1
    else:
        raise NonMonotoneQuality("quality direction reverses along the curve")

    return RDCurveSamples(
        rates=rates,
        qualities=quals,
        metric_name=metric_name,
        source_label=source_label,
        quality_direction=direction,
    )


def to_log_rate(samples: RDCurveSamples) -> RDCurveSamples:
    """Replace every rate by its natural logarithm (ordering is preserved)."""
    if samples.log_rates:
        return samples
    return RDCurveSamples(
        rates=np.log(samples.rates),
        qualities=samples.qualities,
        metric_name=samples.metric_name,
        source_label=samples.source_label,
        quality_direction=samples.quality_direction,
        log_rates=True,
    )


def project_axes(log_samples: RDCurveSamples, mode: str) -> XYSeries:
    """Project log-rate samples onto integration axes for the given mode.

    BD-BR integrates log-rate over quality (X=quality, Y=log-rate);
    BD-quality integrates quality over log-rate.  For decreasing-quality
    metrics in BD-BR mode the point order is reversed so that xs increase.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not log_samples.log_rates:
        raise ValueError("project_axes expects log-transformed samples")
    if mode == MODE_QUALITY:
        return XYSeries(
            xs=log_samples.rates, ys=log_samples.qualities, mode_tag=mode
        )
    xs = log_samples.qualities
    ys = log_samples.rates
    if log_samples.quality_direction < 0:
        xs = xs[::-1]
        ys = ys[::-1]
    return XYSeries(xs=xs, ys=ys, mode_tag=mode)


def intersect_intervals(a: XYSeries, b: XYSeries) -> IntegrationInterval:
    """Intersection of the two series' X ranges; the valid BD interval."""
    lo = max(a.xs[0], b.xs[0])
    hi = min(a.xs[-1], b.xs[-1])
    tol = REL_TIE_TOL * max(abs(lo), abs(hi), 1.0)
    if not hi - lo > tol:
        raise EmptyIntersection(
            f"series X ranges do not overlap: [{a.xs[0]}, {a.xs[-1]}] vs "
            f"[{b.xs[0]}, {b.xs[-1]}]"
        )
    return IntegrationInterval(float(lo), float(hi))


def delta_from_integrals(
    integral_target: float,
    integral_anchor: float,
    interval: IntegrationInterval,
    mode: str,
    method_tag: str = "oracle",
) -> BDValue:
    """Turn two raw definite integrals into a BD value.

    BD-BR pairs the natural-log rate transform with the e-exponential, so
    delta_R_percent = (e^delta - 1) * 100.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    delta = (integral_target - integral_anchor) / interval.width
    percent = (math.exp(delta) - 1.0) * 100.0 if mode == MODE_BR else None
    return BDValue(
        delta_r_or_d=float(delta),
        delta_R_percent=percent,
        interval=interval,
        mode_tag=mode,
        method_tag=method_tag,
    )
