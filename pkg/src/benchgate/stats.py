"""Median performance change, bootstrap confidence intervals and instability.

Resampling draw order (needed to reproduce results elsewhere): for every
bootstrap sample, the base version's uniforms are drawn first, then the
variation's. A 3-level set of shape (I, S, T) consumes I uniforms for the
instance picks, then I*S suite picks (row-major), then I*S*T iteration picks.
A flat sample of n values consumes n uniforms. A uniform ``u`` selects index
``floor(u * n)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .measurements import AppRequestSeries, MeasurementSet
from .rng import stream

HIERARCHICAL = "hierarchical"
FLAT = "flat"

DEFINITE = "definite"
POTENTIAL = "potential"
NONE = "none"

Sample = Union[MeasurementSet, AppRequestSeries, Sequence[float], np.ndarray]

# uniforms generated per chunk; bounds memory for long request series
_CHUNK_DRAWS = 1 << 22


@dataclass(frozen=True)
class BootstrapConfig:
    samples: int = 10_000
    alpha: float = 0.005
    rng_seed: int = 0
    scheme: str = HIERARCHICAL

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if self.samples < 100:
            raise ValueError("samples must be >= 100")
        if self.scheme not in (HIERARCHICAL, FLAT):
            raise ValueError(f"unknown bootstrap scheme {self.scheme!r}")


@dataclass(frozen=True)
class ChangeReport:
    commit: str
    metric: str
    median_change_pct: float
    ci_low_pct: float
    ci_high_pct: float
    intensity: str = NONE

    def __post_init__(self):
        if self.ci_low_pct > self.ci_high_pct:
            raise ValueError("ci_low_pct must not exceed ci_high_pct")

    @property
    def instability_pct(self) -> float:
        return self.ci_high_pct - self.ci_low_pct

    def to_dict(self) -> dict:
        d = asdict(self)
        d["instability_pct"] = self.instability_pct
        return {k: d[k] for k in REPORT_FIELDS}


REPORT_FIELDS = ["commit", "metric", "median_change_pct", "ci_low_pct", "ci_high_pct",
                 "instability_pct", "intensity"]


def _values(x: Sample) -> np.ndarray:
    if isinstance(x, MeasurementSet):
        return x.values.reshape(-1)
    if isinstance(x, AppRequestSeries):
        return x.latencies
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty sample")
    return arr


def median_change(base: Sample, variation: Sample) -> float:
    """Relative change of the median, in percent of the base median."""
    mb = float(np.median(_values(base)))
    mv = float(np.median(_values(variation)))
    if mb == 0:
        raise ZeroDivisionError("base median is zero")
    return 100.0 * (mv - mb) / mb


def _draw_count(x: Sample, scheme: str) -> int:
    if scheme == HIERARCHICAL:
        i, s, t = x.shape
        return i + i * s + i * s * t
    return _values(x).size


def _row_median(x: np.ndarray) -> np.ndarray:
    """Median of each row; same result as ``np.median(x, axis=1)``, but faster."""
    n = x.shape[1]
    h = n // 2
    if n % 2:
        return np.partition(x, h, axis=1)[:, h]
    part = np.partition(x, (h - 1, h), axis=1)
    return (part[:, h - 1] + part[:, h]) / 2.0


@lru_cache(maxsize=32)
def _leaf_map(shape: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw index ranges and the matrix turning picks into flat leaf indices.

    Row ``r`` of the matrix weights draw ``r``; for output leaf (a, s, t) the
    instance pick counts S*T, the suite pick T and the iteration pick 1.
    """
    ni, ns, nt = shape
    k = ni + ni * ns + ni * ns * nt
    ranges = np.empty(k)
    ranges[:ni] = ni
    ranges[ni:ni + ni * ns] = ns
    ranges[ni + ni * ns:] = nt
    weights = np.zeros((k, ni * ns * nt))
    leaf = 0
    for a in range(ni):
        for s in range(ns):
            for t in range(nt):
                weights[a, leaf] = ns * nt
                weights[ni + a * ns + s, leaf] = nt
                weights[ni + ni * ns + (a * ns + s) * nt + t, leaf] = 1
                leaf += 1
    ranges.setflags(write=False)
    weights.setflags(write=False)
    return ranges, weights


def _resample_medians(x: Sample, u: np.ndarray, scheme: str) -> np.ndarray:
    """Medians of the resamples encoded by the uniform block ``u`` (one row per sample)."""
    if scheme == FLAT:
        vals = _values(x)
        n = vals.size
        idx = np.minimum((u * n).astype(np.int64), n - 1)
        return _row_median(vals[idx])
    ranges, weights = _leaf_map(x.shape)
    picks = np.minimum(np.floor(u * ranges), ranges - 1)
    # small integers, so the product is exact in float64
    leaf = (picks @ weights).astype(np.intp)
    return _row_median(x.values.reshape(-1)[leaf])


def bootstrap_changes(base: Sample, variation: Sample, cfg: BootstrapConfig, *keys) -> np.ndarray:
    """Median change (percent) of each bootstrap sample, in draw order.

    ``keys`` select the random stream, e.g. (commit, metric).
    """
    scheme = cfg.scheme
    if scheme == HIERARCHICAL:
        for x in (base, variation):
            if not isinstance(x, MeasurementSet):
                raise TypeError("hierarchical resampling needs MeasurementSet inputs")
        if base.shape != variation.shape:
            warnings.warn(f"base shape {base.shape} differs from variation shape {variation.shape}",
                          stacklevel=2)
    kb = _draw_count(base, scheme)
    kv = _draw_count(variation, scheme)
    rng = stream(cfg.rng_seed, *keys)
    chunk = max(1, _CHUNK_DRAWS // (kb + kv))
    out = np.empty(cfg.samples)
    for start in range(0, cfg.samples, chunk):
        stop = min(cfg.samples, start + chunk)
        u = rng.random((stop - start, kb + kv))
        mb = _resample_medians(base, u[:, :kb], scheme)
        mv = _resample_medians(variation, u[:, kb:], scheme)
        out[start:stop] = 100.0 * (mv - mb) / mb
    return out


def ci_ranks(samples: int, alpha: float) -> tuple[int, int]:
    """1-based order statistics bounding the CI: ceil(alpha*S) and floor((1-alpha)*S)."""
    # rounding guards against 0.005 * 10000 landing a hair above 50
    lo = math.ceil(round(alpha * samples, 9))
    hi = math.floor(round((1 - alpha) * samples, 9))
    return max(lo, 1), min(max(hi, lo), samples)


def bootstrap_ci(base: Sample, variation: Sample, cfg: BootstrapConfig = BootstrapConfig(),
                 commit: str = "", metric: str = "") -> ChangeReport:
    changes = np.sort(bootstrap_changes(base, variation, cfg, commit, metric))
    lo, hi = ci_ranks(cfg.samples, cfg.alpha)
    return ChangeReport(
        commit=commit,
        metric=metric,
        median_change_pct=median_change(base, variation),
        ci_low_pct=float(changes[lo - 1]),
        ci_high_pct=float(changes[hi - 1]),
    )


def ci_excludes_zero(report: ChangeReport) -> bool:
    return report.ci_low_pct > 0 or report.ci_high_pct < 0


def classify_intensity(report: ChangeReport, flagged: bool | None = None,
                       threshold_pct: float = 1.0) -> ChangeReport:
    """Record how the CI relates to zero.

    A CI clear of zero is definite. Otherwise the change is potential when a
    detector flagged it; without detector input, a median change larger than
    ``threshold_pct`` stands in for the flag.
    """
    if ci_excludes_zero(report):
        intensity = DEFINITE
    else:
        if flagged is None:
            flagged = abs(report.median_change_pct) > threshold_pct
        intensity = POTENTIAL if flagged else NONE
    return replace(report, intensity=intensity)


def cis_overlap(a: ChangeReport, b: ChangeReport) -> bool:
    return a.ci_low_pct <= b.ci_high_pct and b.ci_low_pct <= a.ci_high_pct


def aa_instability(set_a: Sample, set_b: Sample, cfg: BootstrapConfig = BootstrapConfig(),
                   commit: str = "aa", metric: str = "") -> ChangeReport:
    """Bootstrap two runs of the same version against each other (A/A test)."""
    return bootstrap_ci(set_a, set_b, cfg, commit, metric)


def initial_threshold(aa_instability_pct: float, factor: float = 0.75, minimum: float = 1.0,
                      step: float | None = 1.0) -> float:
    """Starting detection threshold from an A/A instability, rounded to ``step``."""
    t = factor * aa_instability_pct
    if step:
        # half-up rounding, not banker's
        t = math.floor(t / step + 0.5) * step
    return max(minimum, t)


def suite_initial_threshold(instabilities: Sequence[float], coverage: float = 0.8) -> float:
    """Smallest threshold at or above ``coverage`` of a suite's A/A instabilities."""
    if not instabilities:
        raise ValueError("no instabilities given")
    ordered = sorted(instabilities)
    k = max(1, math.ceil(round(coverage * len(ordered), 9)))
    return ordered[k - 1]
