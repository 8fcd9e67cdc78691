"""Jump and trend detection over base-anchored change reports.

Every report compares one commit against the same fixed base commit, so the
change between two commits is the difference of their reports' median changes.
Thresholds follow the instability (CI width) of the preceding commits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .measurements import CommitSeries, trim_duet_pair
from .stats import (DEFINITE, FLAT, POTENTIAL, BootstrapConfig, ChangeReport, bootstrap_ci,
                    classify_intensity, cis_overlap)

JUMP = "jump"
TREND = "trend"
UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class DetectorConfig:
    initial_threshold_pct: float = 1.0
    initial_thresholds: Mapping[str, float] = field(default_factory=dict)
    threshold_factor: float = 0.75
    min_threshold_pct: float = 1.0
    instability_window: int = 10
    trend_window: int = 10
    # measure trend drift from the latest detection when it lies inside the window
    reset_on_detection: bool = True

    def __post_init__(self):
        if not 0 < self.threshold_factor <= 1:
            raise ValueError("threshold_factor must lie in (0, 1]")
        if self.instability_window < 2 or self.trend_window < 2:
            raise ValueError("windows must be >= 2")
        if self.min_threshold_pct < 0:
            raise ValueError("min_threshold_pct must be >= 0")

    def initial_for(self, metric: str) -> float:
        return self.initial_thresholds.get(metric, self.initial_threshold_pct)


SPARSE = DetectorConfig(instability_window=3)


@dataclass(frozen=True)
class Detection:
    commit: str
    metric: str
    kind: str
    direction: str
    intensity: str
    magnitude_pct: float
    threshold_pct: float
    commit_index: int = -1
    reference_impact_s: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


DETECTION_FIELDS = ["commit", "metric", "kind", "direction", "intensity", "magnitude_pct",
                    "threshold_pct"]


def dynamic_threshold(history: Sequence[float], cfg: DetectorConfig = DetectorConfig(),
                      metric: str = "") -> float:
    """Threshold from the mean instability of the last ``instability_window`` commits."""
    if not history:
        return max(cfg.min_threshold_pct, cfg.initial_for(metric))
    recent = history[-cfg.instability_window:]
    return max(cfg.min_threshold_pct, cfg.threshold_factor * math.fsum(recent) / len(recent))


def _metric_of(series: Sequence[ChangeReport]) -> str:
    return series[0].metric if series else ""


def _scan(series: Sequence[ChangeReport], cfg: DetectorConfig, want_jumps: bool,
          want_trends: bool) -> list[Detection]:
    metric = _metric_of(series)
    change = [r.median_change_pct for r in series]
    inst = [r.instability_pct for r in series]
    out: list[Detection] = []
    last_detection = -1
    jump_at: set[int] = set()
    for i in range(1, len(series)):
        thr = dynamic_threshold(inst[:i], cfg, metric)
        delta = change[i] - change[i - 1]
        if abs(delta) > thr:
            jump_at.add(i)
            last_detection = i
            if want_jumps:
                out.append(Detection(
                    series[i].commit, metric, JUMP, UP if delta > 0 else DOWN,
                    POTENTIAL if cis_overlap(series[i], series[i - 1]) else DEFINITE,
                    delta, thr, i,
                ))
            continue
        if i < cfg.trend_window:
            continue
        start = i - cfg.trend_window
        if cfg.reset_on_detection:
            start = max(start, last_detection)
        # a step above the threshold inside the window, or a flagged jump, owns the drift
        if any(j in jump_at for j in range(start + 1, i + 1)):
            continue
        if any(abs(change[j] - change[j - 1]) > thr for j in range(start + 1, i + 1)):
            continue
        drift = change[i] - change[start]
        if abs(drift) > thr:
            last_detection = i
            if want_trends:
                out.append(Detection(
                    series[i].commit, metric, TREND, UP if drift > 0 else DOWN,
                    POTENTIAL if cis_overlap(series[i], series[start]) else DEFINITE,
                    drift, thr, i,
                ))
    return out


def detect_jumps(series: Sequence[ChangeReport], cfg: DetectorConfig = DetectorConfig()) -> list[Detection]:
    if len(series) < 2:
        raise ValueError("jump detection needs at least two commits")
    return _scan(series, cfg, want_jumps=True, want_trends=False)


def detect_trends(series: Sequence[ChangeReport], cfg: DetectorConfig = DetectorConfig()) -> list[Detection]:
    if len(series) < cfg.trend_window:
        raise ValueError(f"trend detection needs at least {cfg.trend_window} commits")
    return _scan(series, cfg, want_jumps=False, want_trends=True)


def detect(series: Sequence[ChangeReport], cfg: DetectorConfig = DetectorConfig()) -> list[Detection]:
    """Jumps and trends of one metric, ordered by commit."""
    if len(series) < 2:
        return []
    return _scan(series, cfg, want_jumps=True, want_trends=True)


@dataclass
class Analysis:
    reports: dict[str, list[ChangeReport]]
    detections: list[Detection]
    commits: list[str]

    @property
    def definite_regressions(self) -> list[Detection]:
        return [d for d in self.detections if d.intensity == DEFINITE and d.direction == UP]


def analyze_series(series: CommitSeries, cfg: DetectorConfig = DetectorConfig(),
                   boot: BootstrapConfig = BootstrapConfig(), head_frac: float = 0.05,
                   tail_frac: float = 0.20,
                   reference_impacts: Mapping[str, float] | None = None) -> Analysis:
    """Bootstrap every commit of every metric, then run jump and trend detection.

    Microbenchmarks use ``boot`` as configured; application request series are
    duet-trimmed and resampled flat over their full length.
    """
    reports: dict[str, list[ChangeReport]] = {}
    app_boot = BootstrapConfig(boot.samples, boot.alpha, boot.rng_seed, FLAT)
    for metric in series.micro_metrics:
        reports[metric] = [
            bootstrap_ci(*series.micro[(c, metric)], boot, c, metric)
            for c in series.commits if (c, metric) in series.micro
        ]
    for metric in series.app_metrics:
        if metric in reports:
            raise ValueError(f"metric id {metric!r} used by both a microbenchmark and a request type")
        rows = []
        for c in series.commits:
            if (c, metric) in series.app:
                base, var = trim_duet_pair(*series.app[(c, metric)], head_frac, tail_frac)
                rows.append(bootstrap_ci(base, var, app_boot, c, metric))
        reports[metric] = rows

    detections: list[Detection] = []
    impacts = reference_impacts or {}
    for metric, rows in reports.items():
        found = detect(rows, cfg)
        flagged = {d.commit_index for d in found}
        reports[metric] = [classify_intensity(r, flagged=i in flagged) for i, r in enumerate(rows)]
        if metric in impacts:
            found = [_with_impact(d, impacts[metric]) for d in found]
        detections.extend(found)
    order = {c: k for k, c in enumerate(series.commits)}
    detections.sort(key=lambda d: (order[d.commit], d.metric, d.kind))
    return Analysis(reports, detections, list(series.commits))


def _with_impact(d: Detection, impact: float) -> Detection:
    return Detection(d.commit, d.metric, d.kind, d.direction, d.intensity, d.magnitude_pct,
                     d.threshold_pct, d.commit_index, impact)
