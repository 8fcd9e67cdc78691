"""Call graphs recorded during application benchmarks and microbenchmarks.

Node weights are cumulative execution durations in seconds as recorded by the
tracer. Whether they are self or inclusive times is up to the producer, so
reference impacts are only comparable between graphs recorded the same way.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

APPLICATION = "application"
MICROBENCHMARK = "microbenchmark"
_KINDS = (APPLICATION, MICROBENCHMARK)


class GraphError(ValueError):
    """Raised when a call graph file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class CallGraph:
    kind: str
    graph_id: str
    nodes: Mapping[str, float]
    edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise GraphError(f"unknown graph kind {self.kind!r}")
        if not self.nodes:
            raise GraphError(f"graph {self.graph_id!r} has no nodes")
        for fn, dur in self.nodes.items():
            if not fn:
                raise GraphError(f"graph {self.graph_id!r} has an empty function name")
            if not math.isfinite(dur) or dur < 0:
                raise GraphError(f"{fn}: duration must be finite and >= 0, got {dur!r}")
        for caller, callee in self.edges:
            for end in (caller, callee):
                if end not in self.nodes:
                    raise GraphError(f"edge ({caller}, {callee}) references unknown node {end!r}")
        # freeze the mapping so graphs can be shared safely
        object.__setattr__(self, "nodes", MappingProxyType(dict(self.nodes)))
        object.__setattr__(self, "edges", frozenset(self.edges))

    @property
    def total_duration(self) -> float:
        return math.fsum(self.nodes.values())

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class GraphOverlap:
    common: frozenset[str]
    duration_sum: float

    @property
    def common_count(self) -> int:
        return len(self.common)


def _check_app(app: CallGraph) -> None:
    if app.kind != APPLICATION:
        raise GraphError(f"expected an application graph, got {app.kind} graph {app.graph_id!r}")


def overlap(app: CallGraph, micro: CallGraph) -> GraphOverlap:
    """Functions shared by both graphs, weighted by the application's durations."""
    _check_app(app)
    common = frozenset(app.nodes.keys() & micro.nodes.keys())
    return GraphOverlap(common, math.fsum(app.nodes[fn] for fn in sorted(common)))


def union_coverage(app: CallGraph, micros: Iterable[CallGraph]) -> GraphOverlap:
    _check_app(app)
    covered: set[str] = set()
    for micro in micros:
        covered |= app.nodes.keys() & micro.nodes.keys()
    return GraphOverlap(frozenset(covered), math.fsum(app.nodes[fn] for fn in sorted(covered)))


# --- I/O -------------------------------------------------------------------

def load_callgraph(path: str | Path, format: str | None = None) -> CallGraph:
    """Load a graph from ``json`` or ``edge_csv``; format defaults from the suffix."""
    path = Path(path)
    if not path.is_file():
        raise GraphError(f"call graph file not found: {path}")
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "edge_csv"
    text = path.read_text(encoding="utf-8")
    if format == "json":
        return _parse_json(text, path)
    if format == "edge_csv":
        return _parse_edge_csv(text, path)
    raise GraphError(f"unknown call graph format {format!r}")


def _parse_json(text: str, path: Path) -> CallGraph:
    try:
        doc = json.loads(text)
        origin = doc["origin"]
        kind, graph_id = origin["kind"], str(origin["id"])
        nodes: dict[str, float] = {}
        for entry in doc["nodes"]:
            fn = entry["fn"]
            if fn in nodes:
                raise GraphError(f"{path}: duplicate node {fn!r}")
            nodes[fn] = float(entry["duration_s"])
        edges = {(str(a), str(b)) for a, b in doc.get("edges", [])}
    except GraphError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"{path}: malformed call graph JSON ({exc})") from exc
    return CallGraph(kind, graph_id, nodes, frozenset(edges))


def _parse_edge_csv(text: str, path: Path) -> CallGraph:
    # origin travels in an optional "# origin,<kind>,<id>" header comment
    kind, graph_id = MICROBENCHMARK, path.stem
    nodes: dict[str, float] = {}
    edges: set[tuple[str, str]] = set()
    lines = text.splitlines()
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip():
            continue
        tag = row[0].strip()
        if tag.startswith("#"):
            if tag == "# origin" and len(row) == 3:
                kind, graph_id = row[1].strip(), row[2].strip()
            continue
        if len(row) != 3:
            raise GraphError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        if tag == "node":
            fn = row[1]
            if fn in nodes:
                raise GraphError(f"{path}:{lineno}: duplicate node {fn!r}")
            try:
                nodes[fn] = float(row[2])
            except ValueError as exc:
                raise GraphError(f"{path}:{lineno}: bad duration {row[2]!r}") from exc
        elif tag == "edge":
            edges.add((row[1], row[2]))
        else:
            raise GraphError(f"{path}:{lineno}: unknown record type {tag!r}")
    return CallGraph(kind, graph_id, nodes, frozenset(edges))


def graph_to_dict(graph: CallGraph) -> dict:
    return {
        "origin": {"kind": graph.kind, "id": graph.graph_id},
        "nodes": [{"fn": fn, "duration_s": dur} for fn, dur in graph.nodes.items()],
        "edges": [list(e) for e in sorted(graph.edges)],
    }


def save_callgraph(graph: CallGraph, path: str | Path, format: str = "json") -> None:
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n", encoding="utf-8")
        return
    if format != "edge_csv":
        raise GraphError(f"unknown call graph format {format!r}")
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["# origin", graph.kind, graph.graph_id])
        for fn, dur in graph.nodes.items():
            writer.writerow(["node", fn, repr(dur)])
        for caller, callee in sorted(graph.edges):
            writer.writerow(["edge", caller, callee])
