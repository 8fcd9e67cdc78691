"""Benchmark measurements: microbenchmark hierarchies, duet request series, commit series."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BASE = "base"
VARIATION = "variation"
VERSIONS = (BASE, VARIATION)

MICRO_HEADER = ["benchmark", "commit", "version", "instance", "suite", "iteration", "duration_s"]
APP_HEADER = ["commit", "version", "request_type", "seq", "latency_s"]


class MeasurementError(ValueError):
    pass


def _check_version(version: str) -> None:
    if version not in VERSIONS:
        raise MeasurementError(f"version must be one of {VERSIONS}, got {version!r}")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """One benchmark, one commit, one version: instance runs x suite runs x iterations.

    ``values`` is a float array of shape (instances, suites, iterations).
    """

    benchmark: str
    commit: str
    version: str
    values: np.ndarray

    def __post_init__(self):
        _check_version(self.version)
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 3 or 0 in arr.shape:
            raise MeasurementError(
                f"{self.benchmark}@{self.commit}: values must be a non-empty 3-level hierarchy, "
                f"got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise MeasurementError(f"{self.benchmark}@{self.commit}: durations must be finite and > 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        return (
            (self.benchmark, self.commit, self.version) == (other.benchmark, other.commit, other.version)
            and np.array_equal(self.values, other.values)
        )


def flatten(ms: MeasurementSet) -> list[float]:
    """Leaves in (instance, suite, iteration) order."""
    return ms.values.reshape(-1).tolist()


def regroup(leaves: Sequence[float], shape: tuple[int, int, int]) -> np.ndarray:
    return np.asarray(leaves, dtype=float).reshape(shape)


@dataclass(frozen=True, eq=False)
class AppRequestSeries:
    commit: str
    version: str
    request_type: str
    seq: np.ndarray
    latencies: np.ndarray
    head_cut: int = 0
    tail_cut: int = 0

    def __post_init__(self):
        _check_version(self.version)
        seq = np.array(self.seq, dtype=np.int64)
        lat = np.array(self.latencies, dtype=float)
        if seq.shape != lat.shape or seq.ndim != 1:
            raise MeasurementError("seq and latencies must be 1-d and equally long")
        if len(seq) > 1 and np.any(np.diff(seq) <= 0):
            raise MeasurementError(f"{self.request_type}@{self.commit}: sequence indices must strictly increase")
        if not np.all(np.isfinite(lat)) or np.any(lat <= 0):
            raise MeasurementError(f"{self.request_type}@{self.commit}: latencies must be finite and > 0")
        seq.setflags(write=False)
        lat.setflags(write=False)
        object.__setattr__(self, "seq", seq)
        object.__setattr__(self, "latencies", lat)

    def __len__(self) -> int:
        return len(self.latencies)

    def __eq__(self, other):
        if not isinstance(other, AppRequestSeries):
            return NotImplemented
        return (
            (self.commit, self.version, self.request_type) == (other.commit, other.version, other.request_type)
            and np.array_equal(self.seq, other.seq)
            and np.array_equal(self.latencies, other.latencies)
        )


def trim_cuts(n: int, head_frac: float = 0.05, tail_frac: float = 0.20) -> tuple[int, int]:
    if head_frac < 0 or tail_frac < 0 or head_frac + tail_frac >= 1:
        raise MeasurementError("need 0 <= head_frac, tail_frac and head_frac + tail_frac < 1")
    # tiny epsilon so e.g. 100 * 0.05 floors to 5, not 4
    head = math.floor(n * head_frac + 1e-9)
    tail = math.floor(n * tail_frac + 1e-9)
    if n - head - tail <= 0:
        raise MeasurementError(f"series of {n} entries is empty after trimming")
    return head, tail


def trim_duet_series(series: AppRequestSeries, head_frac: float = 0.05,
                     tail_frac: float = 0.20) -> AppRequestSeries:
    """Drop warm-up entries at the head and the early-finisher tail, by sequence order."""
    head, tail = trim_cuts(len(series), head_frac, tail_frac)
    stop = len(series) - tail
    return AppRequestSeries(
        series.commit, series.version, series.request_type,
        series.seq[head:stop], series.latencies[head:stop],
        head_cut=head, tail_cut=tail,
    )


def trim_duet_pair(base: AppRequestSeries, variation: AppRequestSeries, head_frac: float = 0.05,
                   tail_frac: float = 0.20) -> tuple[AppRequestSeries, AppRequestSeries]:
    """Trim both halves of a duet run with the same cut indices."""
    if len(base) != len(variation):
        raise MeasurementError(
            f"duet pair {base.request_type}@{base.commit} has unequal lengths "
            f"({len(base)} vs {len(variation)})"
        )
    return (trim_duet_series(base, head_frac, tail_frac),
            trim_duet_series(variation, head_frac, tail_frac))


# --- ingestion -------------------------------------------------------------

def _parse_positive(raw: str, where: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise MeasurementError(f"{where}: not a number: {raw!r}") from exc
    if not math.isfinite(value) or value <= 0:
        raise MeasurementError(f"{where}: value must be finite and > 0, got {raw!r}")
    return value


def _parse_int(raw, where: str) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError) as exc:
        raise MeasurementError(f"{where}: not an integer: {raw!r}") from exc


def _micro_sets(rows: Iterable[dict], where: str) -> list[MeasurementSet]:
    groups: dict[tuple[str, str, str], dict[tuple[int, int, int], float]] = {}
    for n, row in enumerate(rows, start=1):
        loc = f"{where}: row {n}"
        try:
            key = (str(row["benchmark"]), str(row["commit"]), str(row["version"]))
            cell = (_parse_int(row["instance"], loc), _parse_int(row["suite"], loc),
                    _parse_int(row["iteration"], loc))
            value = _parse_positive(str(row["duration_s"]), loc)
        except KeyError as exc:
            raise MeasurementError(f"{loc}: missing field {exc}") from exc
        _check_version(key[2])
        cells = groups.setdefault(key, {})
        if cell in cells:
            raise MeasurementError(f"{loc}: duplicate key {key + cell}")
        if min(cell) < 0:
            raise MeasurementError(f"{loc}: negative hierarchy index {cell}")
        cells[cell] = value

    sets = []
    for (bench, commit, version), cells in groups.items():
        shape = tuple(max(c[d] for c in cells) + 1 for d in range(3))
        if len(cells) != shape[0] * shape[1] * shape[2]:
            raise MeasurementError(
                f"{where}: {bench}@{commit}/{version} does not fill a complete "
                f"{shape[0]}x{shape[1]}x{shape[2]} hierarchy"
            )
        values = np.empty(shape)
        for cell, v in cells.items():
            values[cell] = v
        sets.append(MeasurementSet(bench, commit, version, values))
    return sets


def _app_series(rows: Iterable[dict], where: str) -> list[AppRequestSeries]:
    groups: dict[tuple[str, str, str], list[tuple[int, float]]] = {}
    for n, row in enumerate(rows, start=1):
        loc = f"{where}: row {n}"
        try:
            key = (str(row["commit"]), str(row["version"]), str(row["request_type"]))
            entry = (_parse_int(row["seq"], loc), _parse_positive(str(row["latency_s"]), loc))
        except KeyError as exc:
            raise MeasurementError(f"{loc}: missing field {exc}") from exc
        _check_version(key[1])
        groups.setdefault(key, []).append(entry)
    out = []
    for (commit, version, rtype), entries in groups.items():
        entries.sort()
        seqs = [s for s, _ in entries]
        if len(set(seqs)) != len(seqs):
            raise MeasurementError(f"{where}: duplicate sequence index in {rtype}@{commit}/{version}")
        out.append(AppRequestSeries(commit, version, rtype, seqs, [v for _, v in entries]))
    return out


def _read_rows(path: Path, format: str) -> tuple[str, list[dict]]:
    """Return (kind, rows) where kind is 'micro' or 'app'."""
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    elif format == "json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MeasurementError(f"{path}: invalid JSON ({exc})") from exc
        if isinstance(doc, dict):
            doc = doc.get("rows", [])
        if not isinstance(doc, list) or not all(isinstance(r, dict) for r in doc):
            raise MeasurementError(f"{path}: expected a list of row objects")
        rows = doc
        header = list(rows[0].keys()) if rows else []
    else:
        raise MeasurementError(f"unknown measurement format {format!r}")
    if set(header) == set(MICRO_HEADER):
        return "micro", rows
    if set(header) == set(APP_HEADER):
        return "app", rows
    raise MeasurementError(f"{path}: header {header} matches neither {MICRO_HEADER} nor {APP_HEADER}")


def ingest_all(path: str | Path, format: str | None = None) -> list[MeasurementSet] | list[AppRequestSeries]:
    """Read every measurement group contained in one file."""
    path = Path(path)
    if not path.is_file():
        raise MeasurementError(f"measurement file not found: {path}")
    format = format or ("json" if path.suffix.lower() == ".json" else "csv")
    kind, rows = _read_rows(path, format)
    if not rows:
        raise MeasurementError(f"{path}: no measurement rows")
    return _micro_sets(rows, str(path)) if kind == "micro" else _app_series(rows, str(path))


def ingest_measurements(path: str | Path, format: str | None = None) -> MeasurementSet | AppRequestSeries:
    """Read a file holding exactly one measurement set or request series."""
    items = ingest_all(path, format)
    if len(items) != 1:
        raise MeasurementError(f"{path}: expected one measurement group, found {len(items)}")
    return items[0]


def micro_rows(ms: MeasurementSet) -> list[list[str]]:
    rows = []
    for (i, s, t), v in np.ndenumerate(ms.values):
        rows.append([ms.benchmark, ms.commit, ms.version, str(i), str(s), str(t), repr(float(v))])
    return rows


def app_rows(series: AppRequestSeries) -> list[list[str]]:
    return [[series.commit, series.version, series.request_type, str(int(q)), repr(float(v))]
            for q, v in zip(series.seq, series.latencies)]


def write_measurements(items: Sequence[MeasurementSet] | Sequence[AppRequestSeries],
                       path: str | Path, format: str = "csv") -> None:
    """Write sets or series; latencies are written as shortest round-trip decimals."""
    if not items:
        raise MeasurementError("nothing to write")
    micro = isinstance(items[0], MeasurementSet)
    header = MICRO_HEADER if micro else APP_HEADER
    rows = [r for it in items for r in (micro_rows(it) if micro else app_rows(it))]
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    elif format == "json":
        # values stay decimal strings, mirroring the CSV
        path.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n",
                        encoding="utf-8")
    else:
        raise MeasurementError(f"unknown measurement format {format!r}")


# --- commit series ---------------------------------------------------------

@dataclass
class CommitSeries:
    """Paired base/variation data for every commit, all compared to one fixed base commit."""

    project: str
    base_commit: str
    commits: list[str]
    micro: dict[tuple[str, str], tuple[MeasurementSet, MeasurementSet]] = field(default_factory=dict)
    app: dict[tuple[str, str], tuple[AppRequestSeries, AppRequestSeries]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.commits)) != len(self.commits):
            raise MeasurementError("commit ids must be unique")
        if not self.commits:
            raise MeasurementError("a commit series needs at least one commit")

    @property
    def micro_metrics(self) -> list[str]:
        return sorted({b for _, b in self.micro})

    @property
    def app_metrics(self) -> list[str]:
        return sorted({r for _, r in self.app})

    def add(self, items: Iterable[MeasurementSet | AppRequestSeries]) -> None:
        pending: dict[tuple, dict[str, object]] = {}
        for it in items:
            if it.commit not in self.commits:
                raise MeasurementError(f"measurement for unknown commit {it.commit!r}")
            if isinstance(it, MeasurementSet):
                key = ("micro", it.commit, it.benchmark)
            else:
                key = ("app", it.commit, it.request_type)
            slot = pending.setdefault(key, {})
            if it.version in slot:
                raise MeasurementError(f"duplicate {it.version} data for {key[1:]}")
            slot[it.version] = it
        for (kind, commit, metric), slot in pending.items():
            if set(slot) != set(VERSIONS):
                raise MeasurementError(f"{metric}@{commit}: need both base and variation data")
            target = self.micro if kind == "micro" else self.app
            if (commit, metric) in target:
                raise MeasurementError(f"{metric}@{commit}: data loaded twice")
            target[(commit, metric)] = (slot[BASE], slot[VARIATION])


def load_manifest(path: str | Path) -> CommitSeries:
    """Load a commit series from a manifest JSON document.

    ``{"project": ..., "base_commit": ..., "commits": [...], "files": [path | {"path", "format"}]}``;
    relative file paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise MeasurementError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        series = CommitSeries(str(doc.get("project", "")), str(doc["base_commit"]),
                              [str(c) for c in doc["commits"]])
        files = doc["files"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MeasurementError(f"{path}: malformed manifest ({exc})") from exc
    for entry in files:
        if isinstance(entry, str):
            entry = {"path": entry}
        fpath = path.parent / entry["path"]
        series.add(ingest_all(fpath, entry.get("format")))
    return series


def write_manifest(series: CommitSeries, directory: str | Path, stem: str = "measurements") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    if series.micro:
        items = [ms for c in series.commits for b in series.micro_metrics
                 if (c, b) in series.micro for ms in series.micro[(c, b)]]
        write_measurements(items, directory / f"{stem}_micro.csv")
        files.append(f"{stem}_micro.csv")
    if series.app:
        items = [s for c in series.commits for r in series.app_metrics
                 if (c, r) in series.app for s in series.app[(c, r)]]
        write_measurements(items, directory / f"{stem}_app.csv")
        files.append(f"{stem}_app.csv")
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({
        "project": series.project,
        "base_commit": series.base_commit,
        "commits": series.commits,
        "files": files,
    }, indent=2) + "\n", encoding="utf-8")
    return manifest
