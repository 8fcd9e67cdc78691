"""Greedy redundancy removal for microbenchmark suites.

Each step picks the microbenchmark that covers the most application functions
not yet covered by earlier picks. Ties go to the larger reference impact, then
to the lexicographically smaller benchmark id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .callgraph import APPLICATION, CallGraph, GraphError, overlap, union_coverage


@dataclass(frozen=True)
class OptimizerConfig:
    min_gain: int = 4
    top_k: int | None = None

    def __post_init__(self):
        if self.min_gain < 1:
            raise ValueError("min_gain must be >= 1")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1 when given")


@dataclass(frozen=True)
class SelectionStep:
    benchmark: str
    gain_nodes: int
    cumulative_nodes: int
    reference_impact: float


@dataclass(frozen=True)
class OptimizedSuite:
    app_graph: str
    app_total_nodes: int
    steps: tuple[SelectionStep, ...]
    full_suite_nodes: int
    excluded: tuple[str, ...] = field(default=())

    @property
    def benchmarks(self) -> list[str]:
        return [s.benchmark for s in self.steps]

    @property
    def covered_nodes(self) -> int:
        return self.steps[-1].cumulative_nodes if self.steps else 0

    @property
    def practical_relevance(self) -> float:
        return self.covered_nodes / self.app_total_nodes

    @property
    def full_suite_relevance(self) -> float:
        return self.full_suite_nodes / self.app_total_nodes

    def to_dict(self) -> dict:
        return {
            "app_graph": self.app_graph,
            "app_total_nodes": self.app_total_nodes,
            "practical_relevance": self.practical_relevance,
            "full_suite_nodes": self.full_suite_nodes,
            "full_suite_relevance": self.full_suite_relevance,
            "steps": [
                {
                    "benchmark": s.benchmark,
                    "gain_nodes": s.gain_nodes,
                    "cumulative_nodes": s.cumulative_nodes,
                    "reference_impact_s": s.reference_impact,
                }
                for s in self.steps
            ],
            "excluded": list(self.excluded),
        }

    def table(self) -> str:
        rows = [f"{'#':>3}  {'benchmark':<40} {'gain':>5} {'covered':>8} {'impact_s':>12}"]
        for i, s in enumerate(self.steps, start=1):
            rows.append(
                f"{i:>3}  {s.benchmark:<40} {s.gain_nodes:>5} {s.cumulative_nodes:>8} "
                f"{s.reference_impact:>12.3f}"
            )
        rows.append(
            f"practical relevance: {100 * self.practical_relevance:.1f}% "
            f"({self.covered_nodes}/{self.app_total_nodes} nodes; "
            f"full suite {100 * self.full_suite_relevance:.1f}%)"
        )
        return "\n".join(rows)


def reference_impact(app: CallGraph, micro: CallGraph) -> float:
    """Summed application-side duration of the functions ``micro`` exercises."""
    return overlap(app, micro).duration_sum


def practical_relevance(app: CallGraph, micros: Sequence[CallGraph]) -> float:
    if app.kind != APPLICATION:
        raise GraphError("practical relevance needs an application graph")
    return union_coverage(app, micros).common_count / len(app.nodes)


def optimize(app: CallGraph, micros: Sequence[CallGraph],
             cfg: OptimizerConfig = OptimizerConfig()) -> OptimizedSuite:
    if not micros:
        raise ValueError("no microbenchmark graphs given")
    if app.kind != APPLICATION:
        raise GraphError("optimize needs an application graph")
    ids = [m.graph_id for m in micros]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate microbenchmark ids")

    relevant = {m.graph_id: frozenset(app.nodes.keys() & m.nodes.keys()) for m in micros}
    impact = {m.graph_id: reference_impact(app, m) for m in micros}
    full = len(frozenset().union(*relevant.values()))

    covered: set[str] = set()
    remaining = sorted(relevant)
    steps: list[SelectionStep] = []
    while remaining and (cfg.top_k is None or len(steps) < cfg.top_k):
        best = min(remaining, key=lambda b: (-len(relevant[b] - covered), -impact[b], b))
        gain = len(relevant[best] - covered)
        if gain == 0 or gain < cfg.min_gain:
            break
        covered |= relevant[best]
        remaining.remove(best)
        steps.append(SelectionStep(best, gain, len(covered), impact[best]))

    return OptimizedSuite(
        app_graph=app.graph_id,
        app_total_nodes=len(app.nodes),
        steps=tuple(steps),
        full_suite_nodes=full,
        excluded=tuple(remaining),
    )
