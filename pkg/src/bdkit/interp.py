"""Classical R-D interpolators and closed-form integration of their fits.

The three spline fitters are backed by scipy's reference implementations
(not-a-knot cubic spline, Fritsch-Carlson PCHIP, Akima's original method);
their piecewise coefficients are re-expressed in our local power basis so
evaluation and integration stay library-independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.interpolate import Akima1DInterpolator, CubicSpline, PchipInterpolator

from .core import IntegrationInterval, XYSeries
from .errors import OutOfDomain, SingularSystem, TooFewPoints

#: Relative slack allowed when checking interval bounds against the fit domain.
_DOMAIN_EPS = 1e-9


@dataclass(frozen=True)
class PiecewiseCubic:
    """Breakpoints plus per-interval cubics in the local variable u = x - t_k.

    coeffs has shape (m-1, 4), row k holding (c0, c1, c2, c3) with
    f(x) = c0 + c1*u + c2*u^2 + c3*u^3 on [t_k, t_{k+1}].
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        cf = np.array(self.coeffs, dtype=float)
        bp.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cf)
        if len(bp) < 2 or cf.shape != (len(bp) - 1, 4):
            raise ValueError("coeffs must have one quadruple per interval")

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])


@dataclass(frozen=True)
class Polynomial3:
    """Global cubic a0 + a1*x + a2*x^2 + a3*x^3."""

    coefficients: Tuple[float, float, float, float]

    def __post_init__(self):
        coefs = tuple(float(c) for c in self.coefficients)
        if len(coefs) != 4 or not all(math.isfinite(c) for c in coefs):
            raise ValueError("need 4 finite coefficients")
        object.__setattr__(self, "coefficients", coefs)


Fit = Union[PiecewiseCubic, Polynomial3]


def _from_ppoly(pp) -> PiecewiseCubic:
    # scipy PPoly stores coefficients highest degree first, shape (k, m-1).
    c = np.asarray(pp.c, dtype=float)
    k = c.shape[0]
    coeffs = np.zeros((c.shape[1], 4))
    for j in range(k):
        coeffs[:, j] = c[k - 1 - j, :]
    return PiecewiseCubic(breakpoints=np.asarray(pp.x, dtype=float), coeffs=coeffs)


def fit_cubic_ls(series: XYSeries) -> Polynomial3:
    """Least-squares cubic in the monomial basis (exact interpolant at n=4).

    X values are centered on their mean before the orthogonalized solve and
    the returned coefficients are expressed back in plain x.
    """
    xs, ys = series.xs, series.ys
    if len(xs) < 4:
        raise TooFewPoints(f"cubic fit needs >= 4 points, got {len(xs)}")
    m = float(np.mean(xs))
    u = xs - m
    vand = np.vander(u, 4, increasing=True)
    sol, _, rank, _ = np.linalg.lstsq(vand, ys, rcond=None)
    if rank < 4:
        raise SingularSystem("x values are collinear in the Vandermonde sense")
    # expand sum b_j (x - m)^j back into powers of x
    a = [0.0, 0.0, 0.0, 0.0]
    for j, bj in enumerate(sol):
        for i in range(j + 1):
            a[i] += bj * math.comb(j, i) * (-m) ** (j - i)
    return Polynomial3(coefficients=tuple(a))


def fit_csi(series: XYSeries) -> PiecewiseCubic:
    """C2 cubic spline through all points with not-a-knot end conditions."""
    if series.n < 4:
        raise TooFewPoints(f"not-a-knot spline needs >= 4 points, got {series.n}")
    return _from_ppoly(CubicSpline(series.xs, series.ys, bc_type="not-a-knot"))


def fit_pchip(series: XYSeries) -> PiecewiseCubic:
    """Fritsch-Carlson monotone Hermite interpolant."""
    return _from_ppoly(PchipInterpolator(series.xs, series.ys))


def fit_akima(series: XYSeries) -> PiecewiseCubic:
    """Classic Akima (1970) spline with quadratic endpoint secant extrapolation."""
    if series.n < 5:
        raise TooFewPoints(f"Akima spline needs >= 5 points, got {series.n}")
    return _from_ppoly(Akima1DInterpolator(series.xs, series.ys))


def _locate(fit: PiecewiseCubic, x: float) -> int:
    bp = fit.breakpoints
    lo, hi = fit.domain
    slack = _DOMAIN_EPS * (abs(lo) + abs(hi) + 1.0)
    if x < lo - slack or x > hi + slack:
        raise OutOfDomain(f"x={x} outside fit domain [{lo}, {hi}]")
    idx = int(np.searchsorted(bp, x, side="right")) - 1
    return min(max(idx, 0), len(bp) - 2)


def evaluate(fit: Fit, x: float) -> float:
    """Horner evaluation; PiecewiseCubic raises OutOfDomain outside its span."""
    if isinstance(fit, Polynomial3):
        a0, a1, a2, a3 = fit.coefficients
        return a0 + x * (a1 + x * (a2 + x * a3))
    k = _locate(fit, x)
    c0, c1, c2, c3 = fit.coeffs[k]
    u = x - fit.breakpoints[k]
    return float(c0 + u * (c1 + u * (c2 + u * c3)))


def _cubic_antideriv(c, u: float) -> float:
    c0, c1, c2, c3 = c
    return u * (c0 + u * (c1 / 2.0 + u * (c2 / 3.0 + u * c3 / 4.0)))


def integrate_fit(fit: Fit, interval: IntegrationInterval) -> float:
    """Exact closed-form definite integral of the fit over the interval."""
    lo, hi = interval.lo, interval.hi
    if isinstance(fit, Polynomial3):
        return _cubic_antideriv(fit.coefficients, hi) - _cubic_antideriv(
            fit.coefficients, lo
        )

    d_lo, d_hi = fit.domain
    slack = _DOMAIN_EPS * (abs(d_lo) + abs(d_hi) + 1.0)
    if lo < d_lo - slack or hi > d_hi + slack:
        raise OutOfDomain(
            f"interval [{lo}, {hi}] outside fit domain [{d_lo}, {d_hi}]"
        )
    bp = fit.breakpoints
    k_lo = min(max(int(np.searchsorted(bp, lo, side="right")) - 1, 0), len(bp) - 2)
    k_hi = min(max(int(np.searchsorted(bp, hi, side="right")) - 1, 0), len(bp) - 2)
    parts = []
    for k in range(k_lo, k_hi + 1):
        a = max(lo, bp[k])
        b = min(hi, bp[k + 1])
        if b <= a:
            continue
        c = fit.coeffs[k]
        parts.append(_cubic_antideriv(c, b - bp[k]) - _cubic_antideriv(c, a - bp[k]))
    return math.fsum(parts)
