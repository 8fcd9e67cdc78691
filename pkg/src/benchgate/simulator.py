"""Synthetic commit histories with known, injected performance changes.

Noise is multiplicative and lognormal at each level of the measurement
hierarchy, so the true median of every version is its noise-free latency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detection import JUMP, TREND, UP, DOWN, Analysis, DetectorConfig, Detection, analyze_series
from .measurements import BASE, VARIATION, CommitSeries, MeasurementSet
from .rng import stream
from .stats import BootstrapConfig


@dataclass(frozen=True)
class NoiseModel:
    instance: float = 0.0
    suite: float = 0.0
    iteration: float = 0.0

    def __post_init__(self):
        if min(self.instance, self.suite, self.iteration) < 0:
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class InjectedChange:
    commit: int
    magnitude_pct: float
    kind: str = JUMP
    span: int = 1
    metrics: tuple[str, ...] = ()  # empty: every metric

    def __post_init__(self):
        if self.kind not in (JUMP, TREND):
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if self.kind == TREND and self.span < 2:
            raise ValueError("trend span must be >= 2")
        if self.commit < 0:
            raise ValueError("commit index must be >= 0")
        if self.magnitude_pct <= -100:
            raise ValueError("magnitude must be > -100%")

    @property
    def last_commit(self) -> int:
        return self.commit + (self.span - 1 if self.kind == TREND else 0)

    @property
    def direction(self) -> str:
        return UP if self.magnitude_pct > 0 else DOWN

    def affects(self, metric: str) -> bool:
        return not self.metrics or metric in self.metrics

    def factor(self, k: int) -> float:
        """Latency multiplier this change contributes at commit index ``k``."""
        if k < self.commit:
            return 1.0
        if self.kind == JUMP:
            return 1.0 + self.magnitude_pct / 100.0
        done = min(k - self.commit + 1, self.span)
        return 1.0 + self.magnitude_pct / 100.0 * done / self.span


def commit_ids(n: int) -> list[str]:
    return [f"c{k:03d}" for k in range(n)]


def _validate(injections: Sequence[InjectedChange], n_commits: int, metrics: Sequence[str]) -> None:
    for inj in injections:
        if inj.last_commit >= n_commits:
            raise ValueError(f"injection at commit {inj.commit} runs past the series end")
    for a_idx, a in enumerate(injections):
        for b in injections[a_idx + 1:]:
            shared = [m for m in metrics if a.affects(m) and b.affects(m)]
            if not shared:
                continue
            if a.commit == b.commit:
                raise ValueError(f"two injections start at commit {a.commit} on {shared[0]}")
            a_lo, a_hi, b_lo, b_hi = a.commit, a.last_commit, b.commit, b.last_commit
            if (a.kind == TREND or b.kind == TREND) and a_lo <= b_hi and b_lo <= a_hi:
                raise ValueError(f"injections at commits {a.commit} and {b.commit} overlap on {shared[0]}")


def true_factor(injections: Sequence[InjectedChange], metric: str, k: int) -> float:
    f = 1.0
    for inj in injections:
        if inj.affects(metric):
            f *= inj.factor(k)
    return f


def _noisy(latency: float, noise: NoiseModel, shape: tuple[int, int, int], rng) -> np.ndarray:
    ni, ns, nt = shape
    z = (noise.instance * rng.standard_normal((ni, 1, 1))
         + noise.suite * rng.standard_normal((ni, ns, 1))
         + noise.iteration * rng.standard_normal((ni, ns, nt)))
    return latency * np.exp(z)


def generate_history(n_commits: int, base_latency_s: float = 1.0, noise: NoiseModel = NoiseModel(),
                     injections: Sequence[InjectedChange] = (), shape: tuple[int, int, int] = (3, 3, 5),
                     seed: int = 0, metrics: Sequence[str] = ("bench",),
                     project: str = "synthetic") -> CommitSeries:
    """Base and variation measurement sets for every commit and metric.

    Commit 0 is the base commit itself, so its comparison is an A/A run.
    """
    if n_commits < 1:
        raise ValueError("n_commits must be >= 1")
    if base_latency_s <= 0:
        raise ValueError("base latency must be > 0")
    _validate(injections, n_commits, metrics)
    commits = commit_ids(n_commits)
    series = CommitSeries(project, commits[0], commits)
    items = []
    for k, c in enumerate(commits):
        for m in metrics:
            rng = stream(seed, "simulate", k, m)
            items.append(MeasurementSet(m, c, BASE, _noisy(base_latency_s, noise, shape, rng)))
            latency = base_latency_s * true_factor(injections, m, k)
            items.append(MeasurementSet(m, c, VARIATION, _noisy(latency, noise, shape, rng)))
    series.add(items)
    return series


# --- evaluation ------------------------------------------------------------

@dataclass
class Evaluation:
    precision: float
    recall: float
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)
    detections: list[Detection] = field(default_factory=list)
    labels: int = 0

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "labels": self.labels,
                "detections": len(self.detections), "confusion": self.confusion}


def _matches(d: Detection, inj: InjectedChange) -> bool:
    if d.kind != inj.kind or d.direction != inj.direction or not inj.affects(d.metric):
        return False
    if inj.kind == JUMP:
        return abs(d.commit_index - inj.commit) <= 1
    return inj.commit <= d.commit_index <= inj.last_commit


def score(detections: Sequence[Detection], injections: Sequence[InjectedChange],
          metrics: Sequence[str]) -> Evaluation:
    """Precision and recall of detections against injected labels.

    Labels are (injection, metric) pairs. Without detections precision is 1.0;
    without labels recall is 1.0.
    """
    labels = [(inj, m) for inj in injections for m in metrics if inj.affects(m)]
    hit_labels = set()
    tp_det = 0
    confusion = {k: {"tp": 0, "fp": 0, "fn": 0} for k in (JUMP, TREND)}
    for d in detections:
        matched = [n for n, (inj, m) in enumerate(labels) if m == d.metric and _matches(d, inj)]
        if matched:
            tp_det += 1
            confusion[d.kind]["tp"] += 1
            hit_labels.update(matched)
        else:
            confusion[d.kind]["fp"] += 1
    for n, (inj, _) in enumerate(labels):
        if n not in hit_labels:
            confusion[inj.kind]["fn"] += 1
    precision = tp_det / len(detections) if detections else 1.0
    recall = len(hit_labels) / len(labels) if labels else 1.0
    return Evaluation(precision, recall, confusion, list(detections), len(labels))


def evaluate_detector(series: CommitSeries, injections: Sequence[InjectedChange],
                      cfg: DetectorConfig = DetectorConfig(),
                      boot: BootstrapConfig = BootstrapConfig()) -> Evaluation:
    analysis: Analysis = analyze_series(series, cfg, boot)
    metrics = series.micro_metrics + series.app_metrics
    return score(analysis.detections, injections, metrics)


def aggregate(evals: Sequence[Evaluation]) -> Evaluation:
    """Pool confusion counts of several runs into one evaluation."""
    confusion = {k: {"tp": 0, "fp": 0, "fn": 0} for k in (JUMP, TREND)}
    for e in evals:
        for kind, counts in e.confusion.items():
            for name, v in counts.items():
                confusion[kind][name] += v
    tp = sum(c["tp"] for c in confusion.values())
    fp = sum(c["fp"] for c in confusion.values())
    fn = sum(c["fn"] for c in confusion.values())
    labels = sum(e.labels for e in evals)
    detections = [d for e in evals for d in e.detections]
    return Evaluation(
        precision=tp / (tp + fp) if tp + fp else 1.0,
        recall=(labels - fn) / labels if labels else 1.0,
        confusion=confusion,
        detections=detections,
        labels=labels,
    )
