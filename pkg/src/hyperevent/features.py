"""Receiver-selection and event-timing covariates over a rolling window.

For each event e, history statistics count earlier events whose timestamp
falls in the half-open window (anchor - L, anchor], where the anchor is the
previous event's timestamp (the observation start for the first event) and
L is the window length in hours. The boundary at anchor - L is excluded;
events exactly at the anchor are included. Events sharing a timestamp see
their same-time predecessors (in stream order) through the closed right
endpoint.

Receiver-selection statistics are per ordered node pair (i, j); a multicast
event contributes once per receiver indicator. ``hyperedge_size`` counts an
event with n receivers as n, so it totals receiver slots rather than
events. Triadic counts (two_send, two_receive, sibling, cosibling) sum the
products of directed send counts through every third node h distinct from
both endpoints.

Timing statistics are per candidate initiator i; the weekend/PM indicators
are derived from the anchor converted to calendar time via the dataset
epoch, so they are constant across i for a fixed event.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .data import Dataset, NodeTable
from .errors import ConfigError

RECEIVER_FEATURES = (
    "intercept",
    "gender_sender",
    "gender_receiver",
    "gender_homophily",
    "outdegree",
    "indegree",
    "hyperedge_size",
    "interaction",
    "send",
    "receive",
    "two_send",
    "two_receive",
    "sibling",
    "cosibling",
)
TIMING_FEATURES = (
    "intercept",
    "gender",
    "manager",
    "outdegree",
    "indegree",
    "weekend",
    "PM",
)

DEFAULT_WINDOW_HOURS = 168.0


def _canonical(selected, builtins, kind):
    selected = tuple(selected)
    unknown = [s for s in selected if s not in builtins]
    if unknown:
        raise ConfigError(f"unknown {kind} feature(s) {unknown}; built-ins: {builtins}")
    if len(set(selected)) != len(selected):
        raise ConfigError(f"duplicate {kind} feature names")
    rest = tuple(s for s in selected if s != "intercept")
    return ("intercept",) + rest


@dataclass(frozen=True)
class FeatureSpec:
    """Selected statistics plus the rolling-window length.

    The intercept is always included and always occupies column 0 of both
    outputs; remaining columns keep the given order.
    """

    receiver: tuple[str, ...] = RECEIVER_FEATURES
    timing: tuple[str, ...] = TIMING_FEATURES
    window_hours: float = DEFAULT_WINDOW_HOURS

    def __post_init__(self):
        object.__setattr__(self, "receiver", _canonical(self.receiver, RECEIVER_FEATURES, "receiver"))
        object.__setattr__(self, "timing", _canonical(self.timing, TIMING_FEATURES, "timing"))
        if not self.window_hours > 0:
            raise ConfigError("window_hours must be positive")

    @property
    def n_receiver(self) -> int:
        return len(self.receiver)

    @property
    def n_timing(self) -> int:
        return len(self.timing)

    @property
    def needs_calendar(self) -> bool:
        return "weekend" in self.timing or "PM" in self.timing


@dataclass
class WindowCounts:
    """Send counts inside one window: matrix entry [i, j] = events from i
    carrying j among the receivers; ``events_by_sender`` counts events once
    regardless of size."""

    send: np.ndarray
    events_by_sender: np.ndarray

    @classmethod
    def empty(cls, n_nodes: int) -> "WindowCounts":
        return cls(np.zeros((n_nodes, n_nodes)), np.zeros(n_nodes))

    def add(self, sender: int, receivers: np.ndarray, sign: float = 1.0) -> None:
        self.send[sender] += sign * receivers
        self.events_by_sender[sender] += sign


def window_counts(ds: Dataset, e: int, window_hours: float) -> WindowCounts:
    """Counts for event e by a full scan of the prior history (reference
    implementation; the rolling builder must agree with it exactly)."""
    if not 0 <= e < ds.n_events:
        raise IndexError(f"event index {e} out of range")
    anchor = ds.times[e - 1] if e >= 1 else ds.t0
    counts = WindowCounts.empty(ds.n_nodes)
    lo = anchor - window_hours
    for k in range(e):
        t = ds.times[k]
        if lo < t <= anchor:
            counts.add(int(ds.senders[k]), ds.receivers[k].astype(np.float64))
    return counts


def receiver_tensor(counts: WindowCounts, nodes: NodeTable, spec: FeatureSpec) -> np.ndarray:
    """Assemble the (A, A, P) receiver-feature tensor from window counts.

    The diagonal rows i == j are computed like any other entry and are
    ignored by every consumer.
    """
    a = nodes.n_nodes
    s = counts.send
    g = nodes.gender_female.astype(np.float64)
    out_events = counts.events_by_sender
    in_slots = s.sum(axis=0)
    size_slots = s.sum(axis=1)
    ss = s @ s
    columns = {}
    for name in spec.receiver:
        if name == "intercept":
            col = np.ones((a, a))
        elif name == "gender_sender":
            col = np.broadcast_to(g[:, None], (a, a))
        elif name == "gender_receiver":
            col = np.broadcast_to(g[None, :], (a, a))
        elif name == "gender_homophily":
            col = (g[:, None] == g[None, :]).astype(np.float64)
        elif name == "outdegree":
            col = np.broadcast_to(out_events[:, None], (a, a))
        elif name == "indegree":
            col = np.broadcast_to(in_slots[None, :], (a, a))
        elif name == "hyperedge_size":
            col = np.broadcast_to(size_slots[:, None], (a, a))
        elif name == "interaction":
            col = np.broadcast_to((out_events * size_slots)[:, None], (a, a))
        elif name == "send":
            col = s
        elif name == "receive":
            col = s.T
        elif name == "two_send":
            # diag(s) is structurally 0, so the matrix product already
            # excludes h in {i, j}
            col = ss
        elif name == "two_receive":
            col = ss.T
        elif name == "sibling":
            col = s.T @ s
        elif name == "cosibling":
            col = s @ s.T
        else:  # pragma: no cover
            raise ConfigError(name)
        columns[name] = col
    return np.stack([columns[name] for name in spec.receiver], axis=-1)


def _calendar(anchor: float, epoch: datetime | None):
    if epoch is None:
        raise ConfigError("weekend/PM timing features require an epoch in the configuration")
    stamp = epoch + timedelta(hours=float(anchor))
    return float(stamp.weekday() >= 5), float(stamp.hour >= 12)


def timing_tensor(
    counts: WindowCounts,
    nodes: NodeTable,
    spec: FeatureSpec,
    anchor: float,
    epoch: datetime | None,
) -> np.ndarray:
    """Assemble the (A, Q) timing-feature matrix from window counts."""
    a = nodes.n_nodes
    cal = _calendar(anchor, epoch) if spec.needs_calendar else (0.0, 0.0)
    columns = {}
    for name in spec.timing:
        if name == "intercept":
            col = np.ones(a)
        elif name == "gender":
            col = nodes.gender_female.astype(np.float64)
        elif name == "manager":
            col = nodes.is_manager.astype(np.float64)
        elif name == "outdegree":
            col = counts.events_by_sender.copy()
        elif name == "indegree":
            col = counts.send.sum(axis=0)
        elif name == "weekend":
            col = np.full(a, cal[0])
        elif name == "PM":
            col = np.full(a, cal[1])
        else:  # pragma: no cover
            raise ConfigError(name)
        columns[name] = col
    return np.stack([columns[name] for name in spec.timing], axis=-1)


def receiver_features(ds: Dataset, spec: FeatureSpec, e: int) -> np.ndarray:
    """Receiver-feature tensor (A, A, P) for one event, by full rescan."""
    return receiver_tensor(window_counts(ds, e, spec.window_hours), ds.nodes, spec)


def timing_features(ds: Dataset, spec: FeatureSpec, e: int) -> np.ndarray:
    """Timing-feature matrix (A, Q) for one event, by full rescan."""
    anchor = ds.times[e - 1] if e >= 1 else ds.t0
    return timing_tensor(window_counts(ds, e, spec.window_hours), ds.nodes, spec, anchor, ds.epoch)


class RollingWindow:
    """Incremental window state over a realized event history.

    Events are appended in time order with :meth:`push`; :meth:`advance`
    moves the window anchor forward and evicts events that fell out. The
    add/evict updates are integer-valued in float64, so the counts equal a
    full rescan exactly. One instance serves one consumer; it is not
    shared across workers.
    """

    def __init__(self, n_nodes: int, window_hours: float):
        self.window_hours = float(window_hours)
        self.counts = WindowCounts.empty(n_nodes)
        self._events: deque[tuple[float, int, np.ndarray]] = deque()

    def push(self, sender: int, receivers: np.ndarray, time: float) -> None:
        receivers = np.asarray(receivers, dtype=np.float64)
        self._events.append((float(time), int(sender), receivers))
        self.counts.add(sender, receivers)

    def advance(self, anchor: float) -> None:
        lo = anchor - self.window_hours
        while self._events and self._events[0][0] <= lo:
            t, sender, receivers = self._events.popleft()
            self.counts.add(sender, receivers, sign=-1.0)


def build_feature_arrays(ds: Dataset, spec: FeatureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-event feature tensors for a whole dataset.

    Returns ``x`` of shape (E, A, A, P) and ``y`` of shape (E, A, Q),
    computed with a single rolling pass over the stream.
    """
    e_total, a = ds.n_events, ds.n_nodes
    x = np.empty((e_total, a, a, spec.n_receiver))
    y = np.empty((e_total, a, spec.n_timing))
    window = RollingWindow(a, spec.window_hours)
    for e in range(e_total):
        anchor = float(ds.times[e - 1]) if e >= 1 else float(ds.t0)
        window.advance(anchor)
        x[e] = receiver_tensor(window.counts, ds.nodes, spec)
        y[e] = timing_tensor(window.counts, ds.nodes, spec, anchor, ds.epoch)
        window.push(int(ds.senders[e]), ds.receivers[e], float(ds.times[e]))
    return x, y
