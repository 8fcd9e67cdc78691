"""Execution plans for external benchmark runners.

Plans are plain documents. Nothing here starts a benchmark.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .measurements import BASE, VARIATION
from .rng import SplitMix64


@dataclass(frozen=True)
class RmitSlot:
    instance: int
    suite_run: int
    order: tuple[str, ...]
    version_order: tuple[tuple[str, str], ...]  # per entry of ``order``


@dataclass(frozen=True)
class RmitPlan:
    suite: tuple[str, ...]
    instance_runs: int
    suite_runs: int
    iterations: int
    iteration_duration_s: float
    rng_seed: int
    slots: tuple[RmitSlot, ...]

    def measurements_per_benchmark(self) -> int:
        return self.instance_runs * self.suite_runs * self.iterations

    def to_dict(self) -> dict:
        return {
            "kind": "rmit",
            "suite": list(self.suite),
            "instance_runs": self.instance_runs,
            "suite_runs": self.suite_runs,
            "iterations": self.iterations,
            "iteration_duration_s": self.iteration_duration_s,
            "rng_seed": self.rng_seed,
            "measurements_per_benchmark_per_version": self.measurements_per_benchmark(),
            "slots": [
                {
                    "instance": s.instance,
                    "suite_run": s.suite_run,
                    "order": list(s.order),
                    "version_order": [list(v) for v in s.version_order],
                }
                for s in self.slots
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RmitPlan":
        slots = tuple(
            RmitSlot(s["instance"], s["suite_run"], tuple(s["order"]),
                     tuple(tuple(v) for v in s["version_order"]))
            for s in doc["slots"]
        )
        return cls(tuple(doc["suite"]), doc["instance_runs"], doc["suite_runs"], doc["iterations"],
                   doc["iteration_duration_s"], doc["rng_seed"], slots)


def make_rmit_plan(suite: Sequence[str], seed: int, instance_runs: int = 3, suite_runs: int = 3,
                   iterations: int = 5, iteration_duration_s: float = 1.0) -> RmitPlan:
    """Randomized multiple interleaved trials.

    Each (instance, suite run) slot gets its own Fisher-Yates permutation of the
    suite, drawn from one SplitMix64 stream in slot order, followed by one coin
    per benchmark (in permuted order) deciding whether base or variation runs first.
    """
    if not suite:
        raise ValueError("suite is empty")
    if len(set(suite)) != len(suite):
        raise ValueError("suite contains duplicate benchmark ids")
    if min(instance_runs, suite_runs, iterations) < 1 or iteration_duration_s <= 0:
        raise ValueError("plan parameters must be positive")
    rng = SplitMix64(seed)
    slots = []
    for inst in range(instance_runs):
        for run in range(suite_runs):
            order = tuple(rng.shuffle(list(suite)))
            versions = tuple((BASE, VARIATION) if rng.coin() else (VARIATION, BASE) for _ in order)
            slots.append(RmitSlot(inst, run, order, versions))
    return RmitPlan(tuple(suite), instance_runs, suite_runs, iterations, iteration_duration_s,
                    seed, tuple(slots))


@dataclass(frozen=True)
class Workload:
    simulated_servers: int
    sending_interval_s: int
    simulated_duration_h: int
    insert_clients: int
    batch_size: int
    batches: int
    simple_queries: int
    groupby_queries: int
    query_clients: int


WORKLOAD_PRESETS = {
    "victoriametrics": Workload(800, 60, 72, 4, 400, 259_200, 8_640, 1_440, 10),
    "influxdb": Workload(100, 60, 168, 10, 60, 113_400, 1_008, 168, 10),
}


@dataclass(frozen=True)
class DuetPlan:
    base: str
    variation: str
    workload: Workload
    repetitions: int = 3
    co_located: bool = True
    phases: tuple[str, ...] = ("insert", "simple_query", "groupby_query")
    aa: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "kind": "duet",
            "base": self.base,
            "variation": self.variation,
            "co_located": self.co_located,
            "aa": self.aa,
            "repetitions": self.repetitions,
            "phases": [
                {"name": "insert", "batches": self.workload.batches,
                 "clients": self.workload.insert_clients, "batch_size": self.workload.batch_size},
                {"name": "simple_query", "queries": self.workload.simple_queries,
                 "clients": self.workload.query_clients},
                {"name": "groupby_query", "queries": self.workload.groupby_queries,
                 "clients": self.workload.query_clients},
            ],
            "workload": asdict(self.workload),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DuetPlan":
        return cls(doc["base"], doc["variation"], Workload(**doc["workload"]), doc["repetitions"],
                   doc["co_located"], aa=doc["aa"])


def make_duet_plan(base: str, variation: str, workload: Workload | str = "influxdb",
                   repetitions: int = 3) -> DuetPlan:
    if isinstance(workload, str):
        try:
            workload = WORKLOAD_PRESETS[workload]
        except KeyError:
            raise ValueError(f"unknown workload preset {workload!r}; "
                             f"choose from {sorted(WORKLOAD_PRESETS)}") from None
    if repetitions < 3:
        raise ValueError("duet runs need at least three repetitions on fresh hosts")
    aa = base == variation
    if aa:
        warnings.warn(f"base and variation are both {base!r}: this is an A/A plan", stacklevel=2)
    return DuetPlan(base, variation, workload, repetitions, aa=aa)
