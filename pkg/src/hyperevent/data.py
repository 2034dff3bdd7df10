"""Event-log and node-table ingestion, validation, and stream views.

An event stream records, per event, the node that initiated it, the set of
nodes it was directed to (as a binary indicator vector), and a real-valued
timestamp in hours since the start of observation. Loading validates every
record against the structural invariants (sorted timestamps, non-empty
receiver sets, no self-receiving, timestamps inside the observation window)
and rejects violations instead of repairing them.

File formats
------------
Node table: CSV with header ``label,gender_female,is_manager``; booleans 0/1.
Event log: CSV with header ``timestamp,sender,receivers``; ``receivers`` is a
``;``-separated list of labels; ``timestamp`` is either a real number (hours)
or an ISO-8601 datetime converted with a caller-supplied epoch.
All files are UTF-8 with ``\\n`` line endings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from typing import Iterator

import numpy as np

from .errors import (
    ConfigError,
    DataValidationError,
    DuplicateLabelError,
    EmptyReceiverError,
    SelfReceiverError,
    TimestampError,
    UnknownLabelError,
)

NODE_COLUMNS = ("label", "gender_female", "is_manager")
EVENT_COLUMNS = ("timestamp", "sender", "receivers")
RECEIVER_SEP = ";"
HOURS_PER_SECOND = 1.0 / 3600.0


def _parse_binary(raw: str, what: str, line: int) -> bool:
    if raw == "0":
        return False
    if raw == "1":
        return True
    raise DataValidationError(f"line {line}: {what} must be 0 or 1, got {raw!r}")


@dataclass(frozen=True)
class NodeTable:
    """Immutable registry of nodes with their binary attributes.

    Labels are opaque strings mapped bijectively onto indices 0..A-1 in the
    order given at construction.
    """

    labels: tuple[str, ...]
    gender_female: np.ndarray
    is_manager: np.ndarray

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DataValidationError("a node table needs at least 2 nodes")
        seen = set()
        for lab in self.labels:
            if lab in seen:
                raise DuplicateLabelError(f"duplicate node label {lab!r}")
            if RECEIVER_SEP in lab:
                raise DataValidationError(
                    f"label {lab!r} contains the receiver separator {RECEIVER_SEP!r}"
                )
            if lab == "":
                raise DataValidationError("empty node label")
            seen.add(lab)
        gf = np.asarray(self.gender_female, dtype=bool)
        mg = np.asarray(self.is_manager, dtype=bool)
        if gf.shape != (len(self.labels),) or mg.shape != (len(self.labels),):
            raise DataValidationError("attribute arrays must have one entry per label")
        object.__setattr__(self, "gender_female", gf)
        object.__setattr__(self, "is_manager", mg)
        object.__setattr__(self, "_index", {lab: k for k, lab in enumerate(self.labels)})

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError(f"unknown node label {label!r}") from None


def synthetic_nodes(n_nodes: int, prefix: str = "n") -> NodeTable:
    """Node table with generated labels and all-false attributes."""
    labels = tuple(f"{prefix}{k:03d}" for k in range(n_nodes))
    false = np.zeros(n_nodes, dtype=bool)
    return NodeTable(labels, false, false.copy())


def load_nodes(path) -> NodeTable:
    """Read and validate a node-table CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in NODE_COLUMNS if c not in header]
        if missing:
            raise DataValidationError(f"{path}: missing column(s) {missing}")
        labels: list[str] = []
        female: list[bool] = []
        manager: list[bool] = []
        for lineno, row in enumerate(reader, start=2):
            labels.append(row["label"])
            female.append(_parse_binary(row["gender_female"], "gender_female", lineno))
            manager.append(_parse_binary(row["is_manager"], "is_manager", lineno))
    if not labels:
        raise DataValidationError(f"{path}: empty node table")
    return NodeTable(tuple(labels), np.array(female, bool), np.array(manager, bool))


def write_nodes(nodes: NodeTable, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NODE_COLUMNS)
        for k, lab in enumerate(nodes.labels):
            writer.writerow([lab, int(nodes.gender_female[k]), int(nodes.is_manager[k])])


@dataclass(frozen=True)
class EventRecord:
    """Per-event view: initiating node, receiver indicators, timestamp."""

    index: int
    sender: int
    receivers: np.ndarray
    time: float


@dataclass(frozen=True)
class Dataset:
    """Validated, time-ordered event stream over a fixed node table.

    Immutable after construction; safe to share across concurrent readers.
    ``epoch`` (optional) anchors the hour scale to calendar time and is
    required only by calendar-derived features.
    """

    senders: np.ndarray
    receivers: np.ndarray
    times: np.ndarray
    t0: float
    nodes: NodeTable
    epoch: datetime | None = None

    def __post_init__(self):
        s = np.asarray(self.senders, dtype=np.int64)
        r = np.asarray(self.receivers, dtype=np.uint8)
        t = np.asarray(self.times, dtype=np.float64)
        n = self.nodes.n_nodes
        if r.shape != (s.shape[0], n) or t.shape != s.shape:
            raise DataValidationError("event array shapes disagree")
        if s.size:
            if s.min() < 0 or s.max() >= n:
                raise DataValidationError("sender index out of range")
            if np.any(np.diff(t) < 0):
                raise DataValidationError("timestamps must be non-decreasing")
            if t[0] < self.t0:
                raise TimestampError("first event precedes the observation start")
            if np.any(t <= 0):
                raise TimestampError("timestamps must be positive")
            if np.any(r > 1):
                raise DataValidationError("receiver indicators must be 0/1")
            if np.any(r[np.arange(s.shape[0]), s] != 0):
                raise SelfReceiverError("an event lists its sender as a receiver")
            if np.any(r.sum(axis=1) < 1):
                raise EmptyReceiverError("an event has no receivers")
        object.__setattr__(self, "senders", s)
        object.__setattr__(self, "receivers", r)
        object.__setattr__(self, "times", t)

    @property
    def n_events(self) -> int:
        return int(self.senders.shape[0])

    @property
    def n_nodes(self) -> int:
        return self.nodes.n_nodes

    def event(self, e: int) -> EventRecord:
        if not 0 <= e < self.n_events:
            raise IndexError(f"event index {e} out of range")
        return EventRecord(e, int(self.senders[e]), self.receivers[e], float(self.times[e]))

    def records(self) -> Iterator[EventRecord]:
        for e in range(self.n_events):
            yield self.event(e)


def parse_timestamp(raw: str, epoch: datetime | None) -> float:
    """Timestamp cell -> hours. Accepts a real number or ISO-8601 text."""
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError:
        raise DataValidationError(f"unparseable timestamp {raw!r}") from None
    if epoch is None:
        raise ConfigError(
            "calendar timestamps in the event log require an epoch in the configuration"
        )
    return (stamp - epoch).total_seconds() * HOURS_PER_SECOND


def load_events(path, nodes: NodeTable, t0: float, epoch: datetime | None = None) -> Dataset:
    """Read, validate, and time-sort an event-log CSV.

    The sort is stable: records sharing a timestamp keep their file order.
    """
    senders: list[int] = []
    rows: list[np.ndarray] = []
    times: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in EVENT_COLUMNS if c not in header]
        if missing:
            raise DataValidationError(f"{path}: missing column(s) {missing}")
        for lineno, row in enumerate(reader, start=2):
            t = parse_timestamp(row["timestamp"], epoch)
            if t < t0:
                raise TimestampError(f"line {lineno}: timestamp {t} precedes t0={t0}")
            sender = nodes.index_of(row["sender"])
            raw = row["receivers"]
            labels = [x for x in raw.split(RECEIVER_SEP)] if raw else []
            if not labels or any(lab == "" for lab in labels):
                raise EmptyReceiverError(f"line {lineno}: empty receiver list")
            rec = np.zeros(nodes.n_nodes, dtype=np.uint8)
            for lab in labels:
                j = nodes.index_of(lab)
                if j == sender:
                    raise SelfReceiverError(f"line {lineno}: sender {lab!r} listed as receiver")
                if rec[j]:
                    raise DataValidationError(f"line {lineno}: receiver {lab!r} repeated")
                rec[j] = 1
            senders.append(sender)
            rows.append(rec)
            times.append(t)
    order = np.argsort(np.asarray(times), kind="stable")
    e = len(senders)
    sarr = np.asarray(senders, dtype=np.int64)[order] if e else np.zeros(0, np.int64)
    rarr = np.stack(rows)[order] if e else np.zeros((0, nodes.n_nodes), np.uint8)
    tarr = np.asarray(times, dtype=np.float64)[order] if e else np.zeros(0, np.float64)
    return Dataset(sarr, rarr, tarr, float(t0), nodes, epoch)


def write_events(ds: Dataset, path) -> None:
    """Write the event-log CSV (hours timestamps, full float precision)."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_COLUMNS)
        for rec in ds.records():
            receivers = RECEIVER_SEP.join(
                ds.nodes.labels[j] for j in np.flatnonzero(rec.receivers)
            )
            writer.writerow([repr(rec.time), ds.nodes.labels[rec.sender], receivers])


def time_increments(ds: Dataset) -> np.ndarray:
    """Waiting times between consecutive events; the first counts from t0.

    Entries are >= 0 and are exactly 0 precisely for events that share a
    timestamp with their predecessor.
    """
    return np.diff(ds.times, prepend=ds.t0)


@dataclass(frozen=True)
class TieGrouping:
    """Partition of events into groups of exactly equal timestamps."""

    times: np.ndarray
    group_of: np.ndarray
    groups: tuple[np.ndarray, ...]

    @property
    def n_groups(self) -> int:
        return int(self.times.shape[0])

    def increments(self, t0: float) -> np.ndarray:
        """Gaps between consecutive unique timepoints; first counts from t0."""
        return np.diff(self.times, prepend=t0)


def tie_grouping(ds: Dataset) -> TieGrouping:
    """Group events by exact timestamp equality (no tolerance)."""
    unique, inverse = np.unique(ds.times, return_inverse=True)
    groups = tuple(np.flatnonzero(inverse == m) for m in range(unique.shape[0]))
    return TieGrouping(unique, inverse.astype(np.int64), groups)
