"""Panel data model and ingestion for multi-node hourly time series.

A :class:`Panel` is an immutable N x T matrix of hourly observations (one row
per node) with a common start timestamp and a fixed one-hour sample interval.
Nodes carry a component-role tag so ingested market data can label which part
of a locational price decomposition (energy, loss, congestion) a series
represents; the decomposition itself is never computed here.

The CSV schema is: header ``timestamp,<node>,<node>,...``, one row per hour,
ISO-8601 timestamps on a contiguous hourly lattice, decimal prices in every
cell. The JSON schema is ``{"start": <iso8601>, "nodes": [names],
"values": [[row-major hours x nodes]]}``. Values round-trip bit-identically
through either format.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import EmptyPanel, GapDetected, MalformedFile

HOUR = timedelta(hours=1)

DEFAULT_START = datetime(2020, 1, 1, 0, 0, 0)


class ComponentRole(str, enum.Enum):
    """Which term of the nodal price decomposition a series represents."""

    MCC = "MCC"
    MEC = "MEC"
    MLC = "MLC"
    LMP = "LMP"
    OTHER = "OTHER"


@dataclass(frozen=True)
class NodeId:
    name: str
    role: ComponentRole = ComponentRole.OTHER

    def __post_init__(self):
        if not self.name:
            raise MalformedFile("node name must be nonempty")


@dataclass(frozen=True)
class SeriesView:
    """One node's values; length always matches the parent panel."""

    node: NodeId
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)


class Panel:
    """Immutable matrix of hourly series, safe for concurrent reads.

    values is stored as float64 (prices span many orders of magnitude and
    feed cumulative sums over thousands of points) and marked read-only.
    Non-finite values are rejected rather than imputed.
    """

    def __init__(self, nodes: list[NodeId], start_time: datetime, values: np.ndarray):
        values = np.array(values, dtype=np.float64, order="C")
        if values.ndim != 2:
            raise MalformedFile("panel values must be a 2-D [nodes x hours] matrix")
        n, t = values.shape
        if n < 1:
            raise EmptyPanel("panel needs at least one node")
        if t < 2:
            raise EmptyPanel("panel needs at least two hourly rows")
        if len(nodes) != n:
            raise MalformedFile(f"{len(nodes)} node ids for {n} value rows")
        names = [nd.name for nd in nodes]
        if len(set(names)) != len(names):
            raise MalformedFile("node names must be unique within a panel")
        if not np.all(np.isfinite(values)):
            raise MalformedFile("panel contains missing or non-finite values")
        values.setflags(write=False)
        self.nodes = list(nodes)
        self.start_time = start_time
        self.values = values
        self.sample_interval = HOUR

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_hours(self) -> int:
        return self.values.shape[1]

    def series(self, index: int) -> SeriesView:
        return SeriesView(self.nodes[index], self.values[index])

    def series_by_name(self, name: str) -> SeriesView:
        for i, node in enumerate(self.nodes):
            if node.name == name:
                return self.series(i)
        raise KeyError(name)

    def __iter__(self):
        return (self.series(i) for i in range(self.n_nodes))

    def timestamps(self) -> list[datetime]:
        return [self.start_time + i * HOUR for i in range(self.n_hours)]


def cumulative_sum(series: SeriesView | np.ndarray) -> np.ndarray:
    """Running sum of the series; output[k] = sum of values[0..k]."""
    values = series.values if isinstance(series, SeriesView) else np.asarray(series)
    if len(values) < 1:
        raise EmptyPanel("cumulative_sum needs at least one value")
    return np.cumsum(np.asarray(values, dtype=np.float64))


def _parse_timestamp(text: str, lineno: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise MalformedFile(f"row {lineno}: bad timestamp {text!r}") from exc


def _parse_cell(text: str, lineno: int, col: str) -> float:
    text = text.strip()
    if not text:
        raise MalformedFile(f"row {lineno}: missing value for {col!r}")
    try:
        value = float(text)
    except ValueError as exc:
        raise MalformedFile(f"row {lineno}: bad value {text!r} for {col!r}") from exc
    if not math.isfinite(value):
        raise MalformedFile(f"row {lineno}: non-finite value for {col!r}")
    return value


def _load_csv(path: Path) -> Panel:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyPanel(f"{path}: empty file")
        if not header or header[0].strip() != "timestamp":
            raise MalformedFile(f"{path}: first header column must be 'timestamp'")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise EmptyPanel(f"{path}: no node columns")
        rows: list[list[float]] = []
        stamps: list[datetime] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise MalformedFile(
                    f"{path} row {lineno}: expected {len(names) + 1} cells, got {len(row)}"
                )
            stamps.append(_parse_timestamp(row[0], lineno))
            rows.append([_parse_cell(c, lineno, names[j]) for j, c in enumerate(row[1:])])
    if len(rows) < 2:
        raise EmptyPanel(f"{path}: need at least two hourly rows")
    for i in range(1, len(stamps)):
        if stamps[i] - stamps[i - 1] != HOUR:
            raise GapDetected(
                f"{path}: non-contiguous timestamps at row {i + 2} "
                f"({stamps[i - 1].isoformat()} -> {stamps[i].isoformat()})"
            )
    values = np.array(rows, dtype=np.float64).T  # (nodes, hours)
    return Panel([NodeId(n) for n in names], stamps[0], values)


def _load_json(path: Path) -> Panel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedFile(f"{path}: invalid JSON: {exc}") from exc
    try:
        start = datetime.fromisoformat(doc["start"])
        names = list(doc["nodes"])
        raw = doc["values"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"{path}: expected keys start/nodes/values") from exc
    if not names:
        raise EmptyPanel(f"{path}: no nodes")
    if len(raw) < 2:
        raise EmptyPanel(f"{path}: need at least two hourly rows")
    for i, row in enumerate(raw):
        if len(row) != len(names):
            raise MalformedFile(f"{path}: row {i} has {len(row)} cells for {len(names)} nodes")
    values = np.array(raw, dtype=np.float64).T
    if not np.all(np.isfinite(values)):
        raise MalformedFile(f"{path}: missing or non-finite values")
    return Panel([NodeId(str(n)) for n in names], start, values)


def load_panel(path: str | Path, fmt: str | None = None) -> Panel:
    """Load and validate a panel from CSV or JSON.

    fmt defaults to the file suffix. Row order in the file becomes node
    order in the panel. Missing cells, ragged rows, and timestamp gaps are
    rejected.
    """
    path = Path(path)
    if not path.exists():
        raise MalformedFile(f"no such file: {path}")
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "json":
        return _load_json(path)
    raise MalformedFile(f"unknown panel format {fmt!r} (expected csv or json)")


def _fmt_float(v: float) -> str:
    # repr of a Python float is the shortest string that parses back exactly
    return repr(float(v))


def save_panel(panel: Panel, path: str | Path, fmt: str | None = None) -> None:
    """Write a panel in the documented CSV or JSON schema.

    Float cells use the shortest round-trip representation, so
    load(save(load(x))) reproduces the values bit for bit.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp"] + [n.name for n in panel.nodes])
            stamps = panel.timestamps()
            for t in range(panel.n_hours):
                writer.writerow(
                    [stamps[t].isoformat()]
                    + [_fmt_float(panel.values[i, t]) for i in range(panel.n_nodes)]
                )
    elif fmt == "json":
        doc = {
            "start": panel.start_time.isoformat(),
            "nodes": [n.name for n in panel.nodes],
            "values": [
                [float(panel.values[i, t]) for i in range(panel.n_nodes)]
                for t in range(panel.n_hours)
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    else:
        raise MalformedFile(f"unknown panel format {fmt!r} (expected csv or json)")
