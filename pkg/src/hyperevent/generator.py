"""Generative simulation of hyperedge event streams.

Every event is produced by a race: each candidate initiator i draws a
receiver set from the non-empty multivariate Bernoulli law with intensities
x[i] . b and a waiting time from the configured timing family with location
derived from y[i]; the initiator with the smallest waiting time wins, its
receiver set and timestamp become the observed event, and the losing
candidates are kept as latent auxiliary data. If several initiators draw
exactly the same minimal waiting time, all of them emit events at the same
timestamp (a measure-zero branch under continuous timing families,
exercised in tests through a degenerate timing stub).

Two orientations are provided: ``simulate`` races the senders of
one-sender/many-receiver events, ``simulate_reversed`` races the receivers
of many-sender/one-receiver events. Both share the race core; the reversed
variant stores each event with its single receiver (the hub) in the sender
column and the sender set in the receiver columns.

Feature state updates use only realized events, never the latent candidate
draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, NodeTable
from .errors import ConfigError
from .features import FeatureSpec, RollingWindow, receiver_tensor, timing_tensor
from .nonempty_bernoulli import sample_rows
from .params import ModelParams, effective_model
from .timing import TimingModel, mean_param, sample_increment


@dataclass(frozen=True)
class CandidateDraw:
    """Latent auxiliary data for one race: every candidate initiator's
    receiver set (rows of ``u``) and waiting time (``tau``)."""

    u: np.ndarray
    tau: np.ndarray


class FixedFeatures:
    """Constant covariate tensors, independent of the realized history.

    ``x`` has shape (A, A, P) and is indexed [initiator, candidate slot];
    ``y`` has shape (A, Q) indexed by initiator.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.x.ndim != 3 or self.x.shape[0] != self.x.shape[1]:
            raise ConfigError("fixed receiver features must have shape (A, A, P)")
        if self.y.ndim != 2 or self.y.shape[0] != self.x.shape[0]:
            raise ConfigError("fixed timing features must have shape (A, Q)")

    def session(self, nodes: NodeTable, t0: float) -> "_FixedSession":
        if nodes.n_nodes != self.x.shape[0]:
            raise ConfigError("fixed feature tensors sized for a different node count")
        return _FixedSession(self.x, self.y)


class _FixedSession:
    def __init__(self, x, y):
        self._xy = (x, y)

    def features(self, anchor: float):
        return self._xy

    def record(self, sender: int, receivers: np.ndarray, time: float) -> None:
        pass


class HistoryFeatures:
    """Rolling-window features recomputed from the growing simulated history."""

    def __init__(self, spec: FeatureSpec, epoch=None):
        self.spec = spec
        self.epoch = epoch

    def session(self, nodes: NodeTable, t0: float) -> "_HistorySession":
        return _HistorySession(self.spec, self.epoch, nodes)


class _HistorySession:
    def __init__(self, spec, epoch, nodes):
        self.spec = spec
        self.epoch = epoch
        self.nodes = nodes
        self.window = RollingWindow(nodes.n_nodes, spec.window_hours)

    def features(self, anchor: float):
        self.window.advance(anchor)
        x = receiver_tensor(self.window.counts, self.nodes, self.spec)
        y = timing_tensor(self.window.counts, self.nodes, self.spec, anchor, self.epoch)
        return x, y

    def record(self, sender: int, receivers: np.ndarray, time: float) -> None:
        self.window.push(sender, receivers, time)


def _as_source(features, epoch=None):
    if isinstance(features, (FixedFeatures, HistoryFeatures)):
        return features
    if isinstance(features, FeatureSpec):
        return HistoryFeatures(features, epoch)
    raise ConfigError("features must be a FeatureSpec, FixedFeatures, or HistoryFeatures")


def draw_candidates(
    x: np.ndarray,
    y: np.ndarray,
    params: ModelParams,
    model: TimingModel,
    rng: np.random.Generator,
) -> CandidateDraw:
    """One race's worth of candidate receiver sets and waiting times."""
    a = x.shape[0]
    lam = x @ params.b
    offdiag = ~np.eye(a, dtype=bool)
    u = sample_rows(lam, rng, offdiag)
    mu = mean_param(params.eta, y, model)
    tau = sample_increment(mu, model, rng)
    return CandidateDraw(u, np.atleast_1d(tau))


def generate_event(
    x: np.ndarray,
    y: np.ndarray,
    params: ModelParams,
    model: TimingModel,
    rng: np.random.Generator,
):
    """Run one race and resolve it.

    Returns ``(winners, draw)`` where ``winners`` is the ascending array of
    initiators attaining the exact minimum waiting time (length one except
    on ties) and ``draw`` holds the full candidate data.
    """
    draw = draw_candidates(x, y, params, effective_model(model, params), rng)
    winners = np.flatnonzero(draw.tau == draw.tau.min())
    return winners, draw


def _assemble(nodes, senders, receivers, times, t0, epoch) -> Dataset:
    e = len(senders)
    a = nodes.n_nodes
    return Dataset(
        np.asarray(senders, dtype=np.int64).reshape(e),
        np.asarray(receivers, dtype=np.uint8).reshape(e, a),
        np.asarray(times, dtype=np.float64).reshape(e),
        float(t0),
        nodes,
        epoch,
    )


def _simulate_fixed(n_events, nodes, params, x, y, model, t0, rng, collect):
    """Vectorized path for history-independent covariates: all races are
    iid given the parameters, so every draw happens in one batch."""
    a = nodes.n_nodes
    lam = x @ params.b
    offdiag = ~np.eye(a, dtype=bool)
    lam_rows = np.broadcast_to(lam, (n_events, a, a)).reshape(n_events * a, a)
    act_rows = np.broadcast_to(offdiag, (n_events, a, a)).reshape(n_events * a, a)
    u_all = sample_rows(lam_rows, rng, act_rows).reshape(n_events, a, a)
    mu = mean_param(params.eta, y, model)
    tau_all = sample_increment(np.broadcast_to(mu, (n_events, a)), model, rng)
    tau_min = tau_all.min(axis=1)
    win_mask = tau_all == tau_min[:, None]
    n_winners = win_mask.sum(axis=1)
    round_times = t0 + np.cumsum(tau_min)
    if np.all(n_winners == 1):
        senders = np.argmax(win_mask, axis=1)
        rounds = np.arange(n_events)
        times = round_times
    else:
        senders_list, rounds_list, times_list = [], [], []
        for k in range(n_events):
            for w in np.flatnonzero(win_mask[k]):
                senders_list.append(w)
                rounds_list.append(k)
                times_list.append(round_times[k])
            if len(senders_list) >= n_events:
                break
        senders = np.asarray(senders_list[:n_events])
        rounds = np.asarray(rounds_list[:n_events])
        times = np.asarray(times_list[:n_events])
    receivers = u_all[rounds, senders]
    ds = _assemble(nodes, senders, receivers, times, t0, None)
    draws = [CandidateDraw(u_all[r], tau_all[r]) for r in rounds] if collect else []
    return ds, draws


def _simulate_history(n_events, nodes, params, source, model, t0, rng, collect, epoch):
    session = source.session(nodes, t0)
    senders, receivers, times, draws = [], [], [], []
    prev_t = float(t0)
    while len(senders) < n_events:
        x, y = session.features(prev_t)
        draw = draw_candidates(x, y, params, model, rng)
        t_min = draw.tau.min()
        t = prev_t + float(t_min)
        for w in np.flatnonzero(draw.tau == t_min):
            if len(senders) >= n_events:
                break
            rec = draw.u[int(w)].copy()
            senders.append(int(w))
            receivers.append(rec)
            times.append(t)
            session.record(int(w), rec, t)
            if collect:
                draws.append(draw)
        prev_t = t
    ds = _assemble(nodes, senders, receivers, times, t0, epoch)
    return ds, draws


def simulate(
    n_events: int,
    nodes: NodeTable,
    params: ModelParams,
    features,
    model: TimingModel,
    t0: float,
    rng: np.random.Generator,
    collect_latents: bool = True,
):
    """Generate ``n_events`` one-sender/many-receiver events.

    ``features`` is a FeatureSpec (rolling-window statistics recomputed
    from the growing history), a FixedFeatures bundle, or HistoryFeatures.
    Returns the dataset and, when ``collect_latents``, one CandidateDraw
    per event (tied events share their race's draw).
    """
    if n_events < 0:
        raise ConfigError("n_events must be non-negative")
    source = _as_source(features)
    model_eff = effective_model(model, params)
    if n_events == 0:
        return _assemble(nodes, [], np.zeros((0, nodes.n_nodes)), [], t0, None), []
    if isinstance(source, FixedFeatures):
        return _simulate_fixed(
            n_events, nodes, params, source.x, source.y, model_eff, t0, rng, collect_latents
        )
    return _simulate_history(
        n_events, nodes, params, source, model_eff, t0, rng, collect_latents, source.epoch
    )


def simulate_reversed(
    n_events: int,
    nodes: NodeTable,
    params: ModelParams,
    features,
    model: TimingModel,
    t0: float,
    rng: np.random.Generator,
) -> Dataset:
    """Generate ``n_events`` many-sender/one-receiver events.

    The race is the mirror image of :func:`simulate`: each candidate hub
    (the event's single receiver) draws its sender set with intensities
    read from the transposed dyadic tensor, so a fixed tensor supplied here
    in true (sender, receiver) orientation reproduces ``simulate`` with the
    roles swapped draw for draw. In the returned dataset the hub occupies
    the sender column and the sender set the receiver columns.

    History-driven features are computed on that hub-first representation
    with the same rolling machinery, which already yields the transposed
    orientation for dyadic counts.
    """
    source = _as_source(features)
    if isinstance(source, FixedFeatures):
        source = FixedFeatures(np.swapaxes(source.x, 0, 1), source.y)
    ds, _ = simulate(n_events, nodes, params, source, model, t0, rng, collect_latents=False)
    return ds
