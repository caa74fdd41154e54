"""Synthetic R-D curve families with analytic integrals, sampling policies,
and training-corpus construction.

Curves live directly in the projected integration plane: x is the BD
integration axis and y the integrand (log-rate over quality for BD-BR,
quality over log-rate for BD-quality).  Three families have closed-form
antiderivatives; the spline family is integrated by adaptive Simpson.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import MODE_BR, MODE_QUALITY, RDCurveSamples, XYSeries, validate_samples
from .errors import BDKitError, DegenerateSpan, OutOfDomain, ToleranceNotMet
from .estimator import normalize_series, segment_interval

FAMILIES = ("log_rd", "power_rd", "rational_rd", "spline_rd")
SAMPLE_POLICIES = ("uniform-x", "uniform-y", "jittered")

CORPUS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AnalyticCurve:
    family: str
    params: Dict[str, object]
    domain: Tuple[float, float]

    @property
    def has_exact_integral(self) -> bool:
        return self.family != "spline_rd"

    @cached_property
    def _spline(self):
        cx = np.asarray(self.params["control_x"], dtype=float)
        cy = np.asarray(self.params["control_y"], dtype=float)
        return PchipInterpolator(cx, cy)

    def y(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "log_rd":
            return p["a"] * np.log(x + p["c"]) + p["b"]
        if self.family == "power_rd":
            return p["a"] - p["b"] * (x + p["c"]) ** (-p["p"])
        if self.family == "rational_rd":
            return p["a"] - p["b"] / (x + p["c"])
        return self._spline(x)

    def antiderivative(self, x: float) -> float:
        p = self.params
        if self.family == "log_rd":
            u = x + p["c"]
            return p["a"] * u * (math.log(u) - 1.0) + p["b"] * x
        if self.family == "power_rd":
            q = 1.0 - p["p"]
            return p["a"] * x - p["b"] * (x + p["c"]) ** q / q
        if self.family == "rational_rd":
            return p["a"] * x - p["b"] * math.log(x + p["c"])
        raise ValueError(f"{self.family} has no closed-form antiderivative")

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params, "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyticCurve":
        return cls(family=d["family"], params=d["params"], domain=tuple(d["domain"]))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Recursive adaptive Simpson quadrature with Richardson correction."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        if depth >= max_depth:
            raise ToleranceNotMet(
                f"adaptive Simpson hit depth {max_depth} on [{lo}, {hi}]"
            )
        return recurse(lo, mid, flo, flm, fmid, left, eps / 2.0, depth + 1) + recurse(
            mid, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1
        )

    if a == b:
        return 0.0
    mid = 0.5 * (a + b)
    fa, fm, fb = f(a), f(mid), f(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0)


def oracle_integral(curve: AnalyticCurve, a: float, b: float) -> float:
    """Ground-truth definite integral of the curve over [a, b]."""
    lo, hi = curve.domain
    slack = 1e-9 * (abs(lo) + abs(hi) + 1.0)
    if a < lo - slack or b > hi + slack:
        raise OutOfDomain(f"[{a}, {b}] outside curve domain [{lo}, {hi}]")
    if curve.has_exact_integral:
        return curve.antiderivative(b) - curve.antiderivative(a)
    return adaptive_simpson(lambda x: float(curve.y(x)), a, b)


def _rng_of(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _monotone_on_grid(curve: AnalyticCurve, points: int = 1000) -> bool:
    xs = np.linspace(curve.domain[0], curve.domain[1], points)
    dy = np.diff(curve.y(xs))
    return bool(np.all(dy > 0) or np.all(dy < 0))


def gen_curve(family: str, rng_seed, direction: int = 0) -> AnalyticCurve:
    """Draw a strictly monotone curve from the given family.

    direction > 0 forces increasing curves, < 0 decreasing, 0 random.
    Parameter ranges put curvature magnitudes across several orders so both
    gentle PSNR-like curves and sharp LPIPS-like knees occur.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    rng = _rng_of(rng_seed)
    for _ in range(200):
        x_lo = rng.uniform(0.05, 4.0)
        span = rng.uniform(0.5, 8.0)
        domain = (x_lo, x_lo + span)
        sign = direction if direction != 0 else (1 if rng.random() < 0.5 else -1)
        if family == "log_rd":
            params = {
                "a": sign * math.exp(rng.uniform(math.log(0.2), math.log(30.0))),
                "b": rng.uniform(-10.0, 10.0),
                "c": rng.uniform(0.01, 1.0),
            }
        elif family == "power_rd":
            params = {
                "a": rng.uniform(-5.0, 5.0),
                "b": sign * math.exp(rng.uniform(math.log(0.1), math.log(20.0))),
                "c": rng.uniform(0.05, 1.0),
                "p": rng.uniform(0.3, 2.5),
            }
        elif family == "rational_rd":
            params = {
                "a": rng.uniform(-5.0, 5.0),
                "b": sign * math.exp(rng.uniform(math.log(0.1), math.log(20.0))),
                "c": rng.uniform(0.05, 1.0),
            }
        else:
            k = int(rng.integers(5, 9))
            gaps = rng.uniform(0.5, 2.0, size=k - 1)
            cx = np.concatenate([[0.0], np.cumsum(gaps)])
            cx = domain[0] + cx / cx[-1] * span
            steps = np.exp(rng.uniform(math.log(0.05), math.log(3.0), size=k - 1))
            base = rng.uniform(-5.0, 5.0)
            cy = base + sign * np.concatenate([[0.0], np.cumsum(steps)])
            params = {"control_x": cx.tolist(), "control_y": cy.tolist()}
        curve = AnalyticCurve(family=family, params=params, domain=domain)
        if _monotone_on_grid(curve):
            return curve
    raise RuntimeError(f"could not generate a monotone {family} curve")


def sample_xy(
    curve: AnalyticCurve, n: int, policy: str, rng_seed
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample n points on the curve; domain endpoints are always included."""
    if policy not in SAMPLE_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if n < 2:
        raise ValueError("need n >= 2 sample points")
    rng = _rng_of(rng_seed)
    lo, hi = curve.domain
    if policy == "uniform-x":
        xs = np.linspace(lo, hi, n)
    elif policy == "jittered":
        xs = np.linspace(lo, hi, n)
        spacing = (hi - lo) / (n - 1)
        xs[1:-1] += rng.uniform(-0.25, 0.25, size=n - 2) * spacing
        xs = np.sort(xs)
    else:  # uniform-y: invert the curve on a dense grid
        grid = np.linspace(lo, hi, 4096)
        yg = curve.y(grid)
        if yg[-1] < yg[0]:
            yg = yg[::-1]
            grid = grid[::-1]
        targets = np.linspace(yg[0], yg[-1], n)
        xs = np.interp(targets, yg, grid)
        xs = np.sort(xs)
        xs[0], xs[-1] = lo, hi
    return xs, np.asarray(curve.y(xs), dtype=float)


def sample_points(
    curve: AnalyticCurve,
    n: int,
    policy: str = "uniform-x",
    rng_seed=0,
    mode: str = MODE_QUALITY,
    metric_name: str = "synthetic",
    source_label: str = "synthetic",
) -> RDCurveSamples:
    """Sample the curve and package the points as rate/quality samples.

    In BD-quality mode the plane x is log-rate and y quality; in BD-BR mode
    x is quality and y log-rate.
    """
    xs, ys = sample_xy(curve, n, policy, rng_seed)
    if mode == MODE_QUALITY:
        rates, quals = np.exp(xs), ys
    elif mode == MODE_BR:
        rates, quals = np.exp(ys), xs
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return validate_samples(
        list(zip(rates, quals)), metric_name=metric_name, source_label=source_label
    )


def draw_interval(
    xs: np.ndarray, rng: np.random.Generator, snap_prob: float = 0.2
) -> Tuple[float, float]:
    """Random integration bounds inside the sampled X range.

    Each endpoint is uniform over the middle 90% of the span, independently
    snapping to the respective data extreme with the given probability.
    """
    lo, hi = float(xs[0]), float(xs[-1])
    span = hi - lo
    a = rng.uniform(lo + 0.05 * span, hi - 0.05 * span)
    b = rng.uniform(lo + 0.05 * span, hi - 0.05 * span)
    a, b = min(a, b), max(a, b)
    if rng.random() < snap_prob:
        a = lo
    if rng.random() < snap_prob:
        b = hi
    return a, b


def segment_records_for_sampling(
    curve: AnalyticCurve,
    xs: np.ndarray,
    ys: np.ndarray,
    x_lo: float,
    x_hi: float,
    curve_id: str,
    seed: int,
) -> List[dict]:
    """One training record per segment of the drawn integration interval.

    Targets are the true normalized segment integrals from the oracle.
    Raises DegenerateSpan when the interval cannot be segmented.
    """
    series = XYSeries(xs=xs, ys=ys, mode_tag=MODE_QUALITY)
    series_norm, params = normalize_series(series)
    lo_n = (x_lo - params.x_min) / params.x_span
    hi_n = (x_hi - params.x_min) / params.x_span
    segments = segment_interval(series_norm.xs, lo_n, hi_n)
    records = []
    for seg in segments:
        a = params.x_min + seg.a * params.x_span
        b = params.x_min + seg.b * params.x_span
        integral = oracle_integral(curve, a, b)
        target_norm = (integral - params.y_min * (b - a)) / (
            params.x_span * params.y_span
        )
        inputs = []
        for idx in seg.support_indices:
            inputs.append(float(series_norm.xs[idx]))
            inputs.append(float(series_norm.ys[idx]))
        if seg.boundary is not None:
            inputs.append(float(seg.boundary))
        records.append(
            {
                "kind": "record",
                "category": seg.category.value,
                "input": inputs,
                "target_norm": float(target_norm),
                "curve_id": curve_id,
                "seed": seed,
            }
        )
    return records


def build_corpus(
    num_curves: int,
    n_range: Tuple[int, int] = (4, 16),
    seed: int = 0,
    train_fraction: float = 0.8,
    samplings_per_curve: int = 1,
    snap_prob: float = 0.2,
):
    """Generate segment training records split by curve identity.

    Returns (train_records, test_records, manifest).  The train/test curve-id
    partitions are disjoint so no test curve leaks into training.
    """
    if num_curves < 1:
        raise ValueError("num_curves must be >= 1")
    master = _rng_of(seed)
    train_records: List[dict] = []
    test_records: List[dict] = []
    skip_count = 0
    category_counts: Dict[str, int] = {}
    n_train_curves = int(round(num_curves * train_fraction))
    for idx in range(num_curves):
        curve_seed = int(master.integers(0, 2**63 - 1))
        rng = _rng_of(curve_seed)
        family = FAMILIES[idx % len(FAMILIES)]
        curve = gen_curve(family, rng)
        curve_id = f"curve-{idx:06d}"
        split = "train" if idx < n_train_curves else "test"
        sink = train_records if split == "train" else test_records
        for _ in range(samplings_per_curve):
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            policy = SAMPLE_POLICIES[int(rng.integers(0, len(SAMPLE_POLICIES)))]
            xs, ys = sample_xy(curve, n, policy, rng)
            x_lo, x_hi = draw_interval(xs, rng, snap_prob=snap_prob)
            try:
                records = segment_records_for_sampling(
                    curve, xs, ys, x_lo, x_hi, curve_id, curve_seed
                )
            except DegenerateSpan:
                skip_count += 1
                continue
            for rec in records:
                category_counts[rec["category"]] = (
                    category_counts.get(rec["category"], 0) + 1
                )
            sink.extend(records)
    manifest = {
        "corpus_format_version": CORPUS_FORMAT_VERSION,
        "seed": seed,
        "num_curves": num_curves,
        "n_range": list(n_range),
        "train_fraction": train_fraction,
        "samplings_per_curve": samplings_per_curve,
        "snap_prob": snap_prob,
        "train_records": len(train_records),
        "test_records": len(test_records),
        "category_counts": dict(sorted(category_counts.items())),
        "skipped_degenerate": skip_count,
    }
    return train_records, test_records, manifest


def _shift_vertically(curve: AnalyticCurve, dy: float) -> AnalyticCurve:
    """Return the curve translated by dy along y (monotonicity-preserving)."""
    params = dict(curve.params)
    if curve.family == "log_rd":
        params["b"] = params["b"] + dy
    elif curve.family in ("power_rd", "rational_rd"):
        params["a"] = params["a"] + dy
    else:
        params["control_y"] = [y + dy for y in params["control_y"]]
    return AnalyticCurve(family=curve.family, params=params, domain=curve.domain)


def build_eval_cases(
    num_cases: int,
    seed: int = 0,
    n_values: Sequence[int] = (4, 5, 6, 7, 8),
    modes: Sequence[str] = (MODE_BR, MODE_QUALITY),
    dense_anchor_points: int = 50,
) -> List[dict]:
    """BD evaluation cases: dense analytic anchor vs sparse sampled target.

    Each case stores both curves, the sampled points, and the oracle ground
    truth BD over the intersection of the two curve domains.
    """
    master = _rng_of(seed)
    cases = []
    attempts = 0
    while len(cases) < num_cases and attempts < num_cases * 20:
        attempts += 1
        case_seed = int(master.integers(0, 2**63 - 1))
        rng = _rng_of(case_seed)
        mode = modes[int(rng.integers(0, len(modes)))]
        n = int(n_values[int(rng.integers(0, len(n_values)))])
        # BD-BR plane needs y (log-rate) increasing in x (quality); in
        # BD-quality mode both curves share the metric's direction
        if mode == MODE_BR:
            direction = 1
        else:
            direction = 1 if rng.random() < 0.5 else -1
        family_t = FAMILIES[int(rng.integers(0, len(FAMILIES)))]
        family_a = FAMILIES[int(rng.integers(0, len(FAMILIES)))]
        target = gen_curve(family_t, rng, direction=direction)
        anchor = gen_curve(family_a, rng, direction=direction)
        # overlap the anchor domain with the target's; the 0.2-span cap on
        # each offset keeps the shared interval wider than any knot interval
        t_lo, t_hi = target.domain
        t_span = t_hi - t_lo
        a_lo = max(t_lo + rng.uniform(-0.1, 0.2) * t_span, 0.01)
        a_hi = t_hi + rng.uniform(-0.2, 0.1) * t_span
        anchor = AnalyticCurve(
            family=anchor.family, params=anchor.params, domain=(a_lo, a_hi)
        )
        if not _monotone_on_grid(anchor):
            continue
        lo = max(t_lo, a_lo)
        hi = min(t_hi, a_hi)
        if hi - lo < 0.55 * t_span:
            continue
        xs_t, ys_t = sample_xy(target, n, "jittered", rng)
        xs_a = np.linspace(a_lo, a_hi, dense_anchor_points)
        integral_t = oracle_integral(target, lo, hi)
        integral_a = oracle_integral(anchor, lo, hi)
        true_delta = (integral_t - integral_a) / (hi - lo)
        if mode == MODE_BR:
            # codec comparisons rarely exceed about -50%..+100% rate change
            # (|log-rate delta| <= 0.7); shift the anchor vertically so the
            # pair sits at a realistic rate distance instead of an
            # arbitrary one
            desired = rng.uniform(-0.7, 0.7)
            shift = true_delta - desired
            anchor = _shift_vertically(anchor, shift)
            integral_a += shift * (hi - lo)
            true_delta = desired
        ys_a = np.asarray(anchor.y(xs_a), dtype=float)
        if mode == MODE_BR:
            # y is log-rate and gets exponentiated when rebuilding samples
            y_peak = max(float(np.max(np.abs(ys_t))), float(np.max(np.abs(ys_a))))
            if y_peak > 50.0:
                continue
        case = {
            "kind": "case",
            "case_id": f"case-{len(cases):06d}",
            "seed": case_seed,
            "mode": mode,
            "n": n,
            "target_curve": target.to_dict(),
            "anchor_curve": anchor.to_dict(),
            "target_xy": [xs_t.tolist(), ys_t.tolist()],
            "anchor_xy": [xs_a.tolist(), ys_a.tolist()],
            "interval": [float(lo), float(hi)],
            "true_delta": float(true_delta),
        }
        if mode == MODE_BR:
            case["true_delta_R"] = math.exp(true_delta) - 1.0
        try:
            # near-flat curves can collapse two rates within tolerance once
            # exponentiated; keep only cases that rebuild into valid samples
            case_samples(case)
        except BDKitError:
            continue
        cases.append(case)
    if len(cases) < num_cases:
        raise RuntimeError("could not generate enough valid evaluation cases")
    return cases


def case_samples(case: dict) -> Tuple[RDCurveSamples, RDCurveSamples]:
    """Reconstruct (anchor, target) RDCurveSamples from a stored case."""
    mode = case["mode"]
    out = []
    for key, label in (("anchor_xy", "anchor"), ("target_xy", "target")):
        xs, ys = (np.asarray(v, dtype=float) for v in case[key])
        if mode == MODE_QUALITY:
            rates, quals = np.exp(xs), ys
        else:
            rates, quals = np.exp(ys), xs
        out.append(
            validate_samples(
                list(zip(rates, quals)),
                metric_name="synthetic",
                source_label=label,
            )
        )
    return out[0], out[1]


# --- on-disk corpus format ---------------------------------------------------

def _dump_ndjson(path, header: dict, records):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _load_ndjson(path) -> Tuple[dict, List[dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise ValueError(f"{path} is missing its header line")
    return header, [json.loads(line) for line in lines[1:]]


def write_corpus_dir(
    out_dir,
    num_curves: int,
    n_range: Tuple[int, int] = (4, 16),
    seed: int = 0,
    num_eval_cases: int = 1000,
    samplings_per_curve: int = 1,
    snap_prob: float = 0.2,
):
    """Generate and write a full corpus directory; returns the manifest."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    train, test, manifest = build_corpus(
        num_curves,
        n_range=n_range,
        seed=seed,
        samplings_per_curve=samplings_per_curve,
        snap_prob=snap_prob,
    )
    cases = build_eval_cases(
        num_eval_cases,
        seed=seed + 1,
        n_values=list(range(n_range[0], min(n_range[1], 8) + 1)),
    )
    header = {
        "kind": "header",
        "version": CORPUS_FORMAT_VERSION,
        "seed": seed,
    }
    _dump_ndjson(os.path.join(out_dir, "train_records.ndjson"), {**header, "split": "train"}, train)
    _dump_ndjson(os.path.join(out_dir, "test_records.ndjson"), {**header, "split": "test"}, test)
    _dump_ndjson(
        os.path.join(out_dir, "eval_cases.ndjson"),
        {**header, "split": "test", "seed": seed + 1},
        cases,
    )
    manifest["eval_cases"] = len(cases)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def read_records(path) -> Tuple[dict, List[dict]]:
    return _load_ndjson(path)


def corpus_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
