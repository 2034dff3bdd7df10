"""Out-of-sample prediction, posterior predictive checks, and diagnostics.

Prediction masks a fraction of senders, receiver indicators, and
timestamps, then alternates (a) drawing every masked value from its
conditional given the current parameters and (b) one full posterior
transition given the completed data. Masked senders are drawn from the
competing-risks posterior over initiators (density of the observed
increment for the candidate times survival of everyone else), masked
indicators from the single-coordinate conditional of the receiver law, and
masked increments by importance sampling with the winner's waiting-time
density as proposal and the losers' survival as weight.

Posterior predictive checks simulate whole datasets from posterior
parameter draws and reduce each to per-node out/in-degrees, the
receiver-set size histogram, and the empirical CDF of time increments on
the observed grid.

The convergence diagnostic compares the means of an early and a late chain
segment, studentized with spectral variance estimates at frequency zero
(lag-window estimator).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import Dataset, time_increments
from .errors import ConfigError, DataValidationError, NumericalError
from .features import FeatureSpec, build_feature_arrays
from .generator import FixedFeatures, HistoryFeatures, simulate
from .inference import (
    ADAPT_TARGET_SCALAR,
    ADAPT_TARGET_VECTOR,
    ChainState,
    McmcConfig,
    PosteriorSamples,
    ReceiverLikelihood,
    TimingLikelihood,
    _BlockStats,
    _outer_iteration,
    init_latents,
)
from .nonempty_bernoulli import gibbs_prob
from .params import ModelParams, PriorSpec
from .timing import TimingModel, apply_link, log_pdf, log_survival


# ---------------------------------------------------------------------------
# holdout masks


@dataclass(frozen=True)
class HoldoutMask:
    """Disjoint views over one dataset marking values held out for testing."""

    sender_events: np.ndarray
    receiver_pairs: np.ndarray
    time_events: np.ndarray
    fraction: float
    seed: int


def make_holdout(ds: Dataset, fraction: float, seed: int) -> HoldoutMask:
    """Uniform random masks over senders, receiver indicators, timestamps.

    Receiver-indicator positions run over every event and every node other
    than that event's observed sender: E x (A - 1) candidates in total.
    """
    if not 0.0 <= fraction < 1.0:
        raise ConfigError("holdout fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    e, a = ds.n_events, ds.n_nodes
    k_senders = int(round(fraction * e))
    k_times = int(round(fraction * e))
    sender_events = np.sort(rng.choice(e, size=k_senders, replace=False))
    time_events = np.sort(rng.choice(e, size=k_times, replace=False))
    ev_grid = np.repeat(np.arange(e), a - 1)
    slot_grid = np.concatenate(
        [np.delete(np.arange(a), ds.senders[ev]) for ev in range(e)]
    ) if e else np.zeros(0, np.int64)
    total = e * (a - 1)
    k_pairs = int(round(fraction * total))
    chosen = np.sort(rng.choice(total, size=k_pairs, replace=False))
    receiver_pairs = np.stack([ev_grid[chosen], slot_grid[chosen]], axis=1) if k_pairs else np.zeros((0, 2), np.int64)
    return HoldoutMask(sender_events, receiver_pairs, time_events, fraction, seed)


# ---------------------------------------------------------------------------
# single-value imputation


def sender_posterior(delta: float, mu_row: np.ndarray, model: TimingModel, allowed=None) -> np.ndarray:
    """Posterior over initiators given the observed waiting time.

    Probability of candidate i is proportional to its density at ``delta``
    times every other candidate's survival past ``delta``; computed in log
    space and normalized.
    """
    lf = np.asarray(log_pdf(delta, mu_row, model), dtype=np.float64)
    ls = np.asarray(log_survival(delta, mu_row, model), dtype=np.float64)
    logw = lf - ls + ls.sum()
    if allowed is not None:
        logw = np.where(allowed, logw, -np.inf)
    if not np.isfinite(logw).any():
        raise NumericalError("sender posterior degenerated to zero mass everywhere")
    pi = np.exp(logw - logsumexp(logw))
    return pi / pi.sum()


def impute_sender(delta, mu_row, model, rng, allowed=None):
    """Draw one initiator from :func:`sender_posterior`; returns (draw, pi)."""
    pi = sender_posterior(delta, mu_row, model, allowed)
    return int(rng.choice(pi.shape[0], p=pi)), pi


def impute_receiver(lam_j: float, rest_nonempty: bool, rng) -> int:
    """Draw one receiver indicator from its single-coordinate conditional."""
    return int(rng.random() < gibbs_prob(lam_j, rest_nonempty))


def impute_increment(
    mu_row: np.ndarray,
    sender: int,
    model: TimingModel,
    rng,
    n_particles: int = 512,
) -> float:
    """Importance-resample one waiting time for an event with hidden timing.

    Proposals come from the winner's density; weights are the product of
    the losing candidates' survival, in log space. If every weight
    underflows, the particle budget is doubled once before giving up.
    """
    mu_row = np.asarray(mu_row, dtype=np.float64)
    others = np.delete(np.arange(mu_row.shape[0]), sender)
    for budget in (n_particles, 2 * n_particles):
        proposals = sample_proposals(mu_row[sender], model, rng, budget)
        if others.size:
            logw = log_survival(proposals[:, None], mu_row[others][None, :], model).sum(axis=1)
        else:
            logw = np.zeros(budget)
        finite = np.isfinite(logw)
        if finite.any():
            w = np.exp(logw - logsumexp(logw))
            w = w / w.sum()
            return float(proposals[rng.choice(budget, p=w)])
    raise NumericalError("all importance weights vanished while imputing a timestamp")


def sample_proposals(mu_scalar: float, model: TimingModel, rng, n: int) -> np.ndarray:
    from .timing import sample_increment

    return np.asarray(sample_increment(np.full(n, mu_scalar), model, rng))


# ---------------------------------------------------------------------------
# prediction metrics


def f1_score(observed, predicted) -> float:
    """Harmonic mean of precision and recall over binary indicator arrays.

    Zero when nothing true was recovered but errors exist; NaN (undefined)
    when there are no positives at all on either side.
    """
    observed = np.asarray(observed).astype(bool).ravel()
    predicted = np.asarray(predicted).astype(bool).ravel()
    if observed.shape != predicted.shape:
        raise DataValidationError("observed/predicted shapes differ")
    tp = int(np.sum(observed & predicted))
    fp = int(np.sum(~observed & predicted))
    fn = int(np.sum(observed & ~predicted))
    return f1_from_counts(tp, fp, fn)


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return float("nan") if (fp == 0 and fn == 0) else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def mdape(observed: float, predictions) -> float:
    """Median absolute percentage error of repeated predictions of one value."""
    if observed == 0:
        raise DataValidationError("relative error is undefined for a zero observation")
    predictions = np.asarray(predictions, dtype=np.float64)
    return float(np.median(np.abs(observed - predictions) / abs(observed)))


# ---------------------------------------------------------------------------
# the prediction experiment


@dataclass(frozen=True)
class PredictConfig:
    """Replication schedule and sampler settings for one prediction run."""

    replications: int = 500
    warmup: int = 100
    particles: int = 512
    inner_b: int = 20
    inner_eta: int = 10
    scale_b: float = 0.1
    scale_eta: float = 0.1
    scale_aux: float = 0.4
    seed: int = 0


@dataclass
class PredictionReport:
    """Aggregated imputation accuracy for one holdout mask."""

    sender_events: np.ndarray
    sender_prob_mean: np.ndarray
    receiver_pairs: np.ndarray
    receiver_marginal: np.ndarray
    f1_overall: float
    f1_per_replication: np.ndarray
    time_events: np.ndarray
    mdape_per_event: np.ndarray
    n_zero_observed_excluded: int
    n_replications: int

    @property
    def sender_prob_overall(self) -> float:
        return float(self.sender_prob_mean.mean()) if self.sender_prob_mean.size else float("nan")

    def as_dict(self) -> dict:
        def listify(arr):
            return [None if isinstance(v, float) and math.isnan(v) else v for v in arr.tolist()]

        return {
            "n_replications": self.n_replications,
            "sender": {
                "events": self.sender_events.tolist(),
                "mean_correct_probability": listify(self.sender_prob_mean),
                "overall_mean_correct_probability": None
                if math.isnan(self.sender_prob_overall)
                else self.sender_prob_overall,
            },
            "receiver": {
                "pairs": self.receiver_pairs.tolist(),
                "marginals": listify(self.receiver_marginal),
                "f1_overall": None if math.isnan(self.f1_overall) else self.f1_overall,
                "f1_per_replication": listify(self.f1_per_replication),
            },
            "timestamp": {
                "events": self.time_events.tolist(),
                "mdape": listify(self.mdape_per_event),
                "n_zero_observed_excluded": self.n_zero_observed_excluded,
            },
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_positions_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kind", "event", "slot", "value"])
            for ev, v in zip(self.sender_events, self.sender_prob_mean):
                writer.writerow(["sender_prob", int(ev), "", repr(float(v))])
            for (ev, j), v in zip(self.receiver_pairs, self.receiver_marginal):
                writer.writerow(["receiver_marginal", int(ev), int(j), repr(float(v))])
            for ev, v in zip(self.time_events, self.mdape_per_event):
                writer.writerow(["mdape", int(ev), "", repr(float(v))])


class _WorkingData:
    """Mutable copy of a dataset during prediction, tracked by original id."""

    def __init__(self, ds: Dataset, mask: HoldoutMask):
        self.nodes = ds.nodes
        self.epoch = ds.epoch
        self.t0 = ds.t0
        self.senders = ds.senders.copy()
        self.receivers = ds.receivers.copy()
        self.times = ds.times.copy()
        self.orig = np.arange(ds.n_events)
        e, a = ds.n_events, ds.n_nodes
        self.sender_masked = np.zeros(e, dtype=bool)
        self.sender_masked[mask.sender_events] = True
        self.time_masked = np.zeros(e, dtype=bool)
        self.time_masked[mask.time_events] = True
        self.receiver_masked = np.zeros((e, a), dtype=bool)
        if mask.receiver_pairs.size:
            self.receiver_masked[mask.receiver_pairs[:, 0], mask.receiver_pairs[:, 1]] = True

    @property
    def n_events(self) -> int:
        return self.senders.shape[0]

    def initialize_masked(self, rng) -> None:
        self.receivers[self.receiver_masked] = 0
        for ev in range(self.n_events):
            if self.receivers[ev].sum() == 0:
                slots = np.flatnonzero(self.receiver_masked[ev])
                self.receivers[ev, rng.choice(slots)] = 1
        for ev in np.flatnonzero(self.sender_masked):
            allowed = np.flatnonzero(self.receivers[ev] == 0)
            self.senders[ev] = rng.choice(allowed)
        gaps = np.diff(self.times, prepend=self.t0)
        typical = float(np.median(gaps[gaps > 0])) if np.any(gaps > 0) else 1.0
        for ev in np.flatnonzero(self.time_masked):
            lo = self.times[ev - 1] if ev else self.t0
            if ev + 1 < self.n_events:
                self.times[ev] = lo + 0.5 * (self.times[ev + 1] - lo)
            else:
                self.times[ev] = lo + typical
        self.resort()

    def resort(self) -> None:
        perm = np.argsort(self.times, kind="stable")
        for name in ("senders", "times", "orig", "sender_masked", "time_masked"):
            setattr(self, name, getattr(self, name)[perm])
        self.receivers = self.receivers[perm]
        self.receiver_masked = self.receiver_masked[perm]
        self._perm = perm

    def dataset(self) -> Dataset:
        return Dataset(self.senders, self.receivers, self.times, self.t0, self.nodes, self.epoch)

    def delta_before(self, ev: int) -> float:
        """Waiting time behind event ev, skipping back over exact ties."""
        t = self.times[ev]
        k = ev - 1
        while k >= 0 and self.times[k] >= t:
            k -= 1
        base = self.times[k] if k >= 0 else self.t0
        return float(t - base)


def predict(
    ds: Dataset,
    mask: HoldoutMask,
    features: FeatureSpec,
    model: TimingModel,
    priors: PriorSpec,
    config: PredictConfig,
) -> PredictionReport:
    """Run the full imputation-and-inference loop over one holdout mask.

    Each replication imputes every masked value in stream order from its
    conditional under the current parameters, restores time order, rebuilds
    the rolling-window features on the completed data, and applies one full
    posterior transition. The first ``warmup`` replications are discarded;
    accuracy is aggregated over the rest against the true held-out values.
    """
    rng = np.random.default_rng(config.seed)
    n_rec = config.replications
    if mask.sender_events.size + mask.receiver_pairs.size + mask.time_events.size == 0:
        empty = np.zeros(0)
        return PredictionReport(
            mask.sender_events, empty, mask.receiver_pairs, empty, float("nan"),
            np.zeros(n_rec) * np.nan, mask.time_events, empty, 0, n_rec,
        )
    true_senders = ds.senders.copy()
    true_receivers = ds.receivers.copy()
    true_tau = time_increments(ds)

    work = _WorkingData(ds, mask)
    work.initialize_masked(rng)

    mcfg = McmcConfig(
        outer=1, inner_b=config.inner_b, inner_eta=config.inner_eta,
        scale_b=config.scale_b, scale_eta=config.scale_eta, scale_aux=config.scale_aux,
        adapt=False,
    )
    aux0 = 1.0 if model.has_aux else None
    params = ModelParams(np.zeros(features.n_receiver), np.zeros(features.n_timing), aux0)
    blocks = {
        "b": _BlockStats(ADAPT_TARGET_VECTOR, math.log(config.scale_b)),
        "eta": _BlockStats(ADAPT_TARGET_VECTOR, math.log(config.scale_eta)),
    }
    if model.has_aux:
        blocks["aux"] = _BlockStats(ADAPT_TARGET_SCALAR, math.log(config.scale_aux))
    u = init_latents(work.receivers, work.senders, rng)
    state = ChainState(params, u, _pinned_of(work), blocks)

    sender_sums = {int(ev): 0.0 for ev in mask.sender_events}
    receiver_sums = {(int(ev), int(j)): 0.0 for ev, j in mask.receiver_pairs}
    tau_draws = {int(ev): [] for ev in mask.time_events}
    f1_reps = []
    recorded = 0
    tp_total = fp_total = fn_total = 0

    x, y = build_feature_arrays(work.dataset(), features)
    for rep in range(config.warmup + n_rec):
        record = rep >= config.warmup
        counts = _impute_pass(work, state, x, y, model, config, rng,
                              true_senders, sender_sums, receiver_sums,
                              true_receivers, tau_draws, record)
        if record:
            recorded += 1
            tp_total += counts[0]
            fp_total += counts[1]
            fn_total += counts[2]
            f1_reps.append(f1_from_counts(*counts))
        work.resort()
        _permute_state(state, work._perm)
        x, y = build_feature_arrays(work.dataset(), features)
        rl = ReceiverLikelihood(x)
        tl = TimingLikelihood(y, work.senders, work.times, work.t0, model)
        state.u[np.arange(work.n_events), work.senders] = work.receivers
        state.pinned = _pinned_of(work)
        _outer_iteration(state, rl, tl, priors, mcfg, rng, post_burn=True)

    sender_events = mask.sender_events
    sender_mean = np.array([sender_sums[int(ev)] / recorded for ev in sender_events])
    receiver_marg = np.array(
        [receiver_sums[(int(ev), int(j))] / recorded for ev, j in mask.receiver_pairs]
    )
    mdape_vals, n_excluded = [], 0
    for ev in mask.time_events:
        obs = float(true_tau[int(ev)])
        if obs == 0.0:
            n_excluded += 1
            mdape_vals.append(float("nan"))
        else:
            mdape_vals.append(mdape(obs, np.asarray(tau_draws[int(ev)])))
    return PredictionReport(
        sender_events,
        sender_mean,
        mask.receiver_pairs,
        receiver_marg,
        f1_from_counts(tp_total, fp_total, fn_total),
        np.asarray(f1_reps, dtype=np.float64),
        mask.time_events,
        np.asarray(mdape_vals, dtype=np.float64),
        n_excluded,
        recorded,
    )


def _pinned_of(work) -> np.ndarray:
    pinned = np.zeros((work.n_events, work.nodes.n_nodes), dtype=bool)
    pinned[np.arange(work.n_events), work.senders] = True
    return pinned


def _permute_state(state: ChainState, perm: np.ndarray) -> None:
    state.u = state.u[perm]
    state.pinned = state.pinned[perm]


def _impute_pass(work, state, x, y, model, config, rng,
                 true_senders, sender_sums, receiver_sums,
                 true_receivers, tau_draws, record):
    """Impute every masked value once, in current stream order.

    Returns pooled (TP, FP, FN) of this replication's receiver draws.
    """
    p = state.params
    model_eff = model.with_aux(p.aux) if model.has_aux else model
    tp = fp = fn = 0
    for ev in range(work.n_events):
        orig = int(work.orig[ev])
        if work.sender_masked[ev]:
            mu_row = apply_link(y[ev] @ p.eta, model_eff.link)
            row = work.receivers[ev]
            rowsum = int(row.sum())
            removable = (row == 0) | (rowsum > 1)
            allowed = ((row == 0) | work.receiver_masked[ev]) & removable
            delta = work.delta_before(ev)
            if delta > 0:
                draw, pi = impute_sender(delta, mu_row, model_eff, rng, allowed=allowed)
            else:
                # degenerate gap (exact tie with the stream start): timing
                # carries no information, fall back to a uniform draw
                pi = allowed / allowed.sum()
                draw = int(rng.choice(pi.shape[0], p=pi))
            if record:
                sender_sums[orig] += float(pi[true_senders[orig]])
            old = int(work.senders[ev])
            work.senders[ev] = draw
            if row[draw]:
                row[draw] = 0
            state.u[ev, draw] = row
            state.pinned[ev, old] = False
            state.pinned[ev, draw] = True
        if work.receiver_masked[ev].any():
            sender = int(work.senders[ev])
            lam_row = x[ev, sender] @ p.b
            row = work.receivers[ev]
            for j in np.flatnonzero(work.receiver_masked[ev]):
                j = int(j)
                if j == sender:
                    value = 0
                else:
                    rest = int(row.sum()) - int(row[j])
                    value = impute_receiver(float(lam_row[j]), rest > 0, rng)
                    row[j] = value
                    state.u[ev, sender, j] = value
                if record:
                    truth = int(true_receivers[int(work.orig[ev]), j])
                    tp += truth and value
                    fp += value and not truth
                    fn += truth and not value
        if work.time_masked[ev]:
            mu_row = apply_link(y[ev] @ p.eta, model_eff.link)
            sender = int(work.senders[ev])
            tau = impute_increment(mu_row, sender, model_eff, rng, config.particles)
            base = work.times[ev - 1] if ev else work.t0
            work.times[ev] = base + tau
            if record:
                tau_draws[orig].append(tau)
    return tp, fp, fn


# ---------------------------------------------------------------------------
# posterior predictive checks


@dataclass
class PpcResult:
    """Replicated summary statistics against their observed counterparts."""

    observed_outdegree: np.ndarray
    sim_outdegree: np.ndarray
    observed_indegree: np.ndarray
    sim_indegree: np.ndarray
    size_bins: np.ndarray
    observed_sizes: np.ndarray
    sim_sizes: np.ndarray
    sim_size_overflow: np.ndarray
    pp_grid: np.ndarray
    pp_observed: np.ndarray
    pp_sim: np.ndarray

    def band_fraction(self, which: str, lo: float = 2.5, hi: float = 97.5) -> float:
        """Share of positions whose observed value sits inside the simulated
        central band."""
        observed, sims = {
            "outdegree": (self.observed_outdegree, self.sim_outdegree),
            "indegree": (self.observed_indegree, self.sim_indegree),
            "sizes": (self.observed_sizes, self.sim_sizes),
        }[which]
        q_lo, q_hi = np.percentile(sims, [lo, hi], axis=0)
        return float(np.mean((observed >= q_lo) & (observed <= q_hi)))

    def write_csv_tables(self, out_dir, prefix: str = "ppc") -> list:
        import os

        paths = []
        for name, observed, sims in (
            ("outdegree", self.observed_outdegree, self.sim_outdegree),
            ("indegree", self.observed_indegree, self.sim_indegree),
            ("receiver_size", self.observed_sizes, self.sim_sizes),
        ):
            q = np.percentile(sims, [2.5, 50.0, 97.5], axis=0)
            path = os.path.join(out_dir, f"{prefix}_{name}.csv")
            with open(path, "w", newline="\n", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                label = "size" if name == "receiver_size" else "node"
                writer.writerow([label, "observed", "sim_mean", "sim_q025", "sim_q500", "sim_q975"])
                axis = self.size_bins if name == "receiver_size" else np.arange(observed.shape[0])
                means = sims.mean(axis=0)
                for k in range(observed.shape[0]):
                    writer.writerow([
                        int(axis[k]), repr(float(observed[k])), repr(float(means[k])),
                        repr(float(q[0, k])), repr(float(q[1, k])), repr(float(q[2, k])),
                    ])
            paths.append(path)
        path = os.path.join(out_dir, f"{prefix}_time_pp.csv")
        q = np.percentile(self.pp_sim, [2.5, 97.5], axis=0)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["increment", "p_observed", "p_sim_mean", "p_sim_q025", "p_sim_q975"])
            means = self.pp_sim.mean(axis=0)
            for k in range(self.pp_grid.shape[0]):
                writer.writerow([
                    repr(float(self.pp_grid[k])), repr(float(self.pp_observed[k])),
                    repr(float(means[k])), repr(float(q[0, k])), repr(float(q[1, k])),
                ])
        paths.append(path)
        return paths


def _params_from_row(names, row, has_aux) -> ModelParams:
    b = np.array([row[k] for k, n in enumerate(names) if n.startswith("b_")])
    eta = np.array([row[k] for k, n in enumerate(names) if n.startswith("eta_")])
    aux = float(row[names.index("aux")]) if has_aux and "aux" in names else None
    return ModelParams(b, eta, aux)


def _ppc_worker(args):
    params, model, features, nodes, n_events, t0, seed = args
    rng = np.random.default_rng(seed)
    sim, _ = simulate(n_events, nodes, params, features, model, t0, rng, collect_latents=False)
    outdeg = np.bincount(sim.senders, minlength=nodes.n_nodes).astype(np.float64)
    indeg = sim.receivers.sum(axis=0).astype(np.float64)
    sizes = sim.receivers.sum(axis=1)
    increments = np.sort(time_increments(sim))
    return outdeg, indeg, sizes, increments


def ppc_run(
    samples: PosteriorSamples,
    ds: Dataset,
    features,
    model: TimingModel,
    n_sims: int,
    seed: int,
    threads: int = 1,
) -> PpcResult:
    """Simulate ``n_sims`` replicate datasets from evenly spaced posterior
    draws and tabulate the check statistics."""
    if samples.draws.shape[0] == 0:
        raise ConfigError("no stored posterior draws to simulate from")
    if isinstance(features, FeatureSpec):
        features = HistoryFeatures(features, ds.epoch)
    idx = (np.arange(n_sims) * samples.draws.shape[0] // n_sims) % samples.draws.shape[0]
    seeds = np.random.SeedSequence(seed).spawn(n_sims)
    jobs = [
        (
            _params_from_row(samples.names, samples.draws[i], model.has_aux),
            model,
            features,
            ds.nodes,
            ds.n_events,
            ds.t0,
            seeds[k],
        )
        for k, i in enumerate(idx)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_ppc_worker, jobs))
    else:
        results = [_ppc_worker(job) for job in jobs]

    observed_sizes_all = ds.receivers.sum(axis=1)
    max_size = int(observed_sizes_all.max())
    size_bins = np.arange(1, max_size + 1)
    obs_sizes = np.bincount(observed_sizes_all, minlength=max_size + 1)[1:].astype(np.float64)
    obs_tau_sorted = np.sort(time_increments(ds))
    grid = obs_tau_sorted
    e = ds.n_events
    pp_observed = np.searchsorted(obs_tau_sorted, grid, side="right") / e

    sim_out = np.stack([r[0] for r in results])
    sim_in = np.stack([r[1] for r in results])
    sim_sizes = np.zeros((n_sims, max_size))
    overflow = np.zeros(n_sims)
    pp_sim = np.zeros((n_sims, e))
    for k, (_, _, sizes, increments) in enumerate(results):
        binned = np.bincount(np.minimum(sizes, max_size + 1), minlength=max_size + 2)
        sim_sizes[k] = binned[1 : max_size + 1]
        overflow[k] = binned[max_size + 1]
        pp_sim[k] = np.searchsorted(increments, grid, side="right") / increments.shape[0]
    return PpcResult(
        np.bincount(ds.senders, minlength=ds.n_nodes).astype(np.float64),
        sim_out,
        ds.receivers.sum(axis=0).astype(np.float64),
        sim_in,
        size_bins,
        obs_sizes,
        sim_sizes,
        overflow,
        grid,
        pp_observed,
        pp_sim,
    )


# ---------------------------------------------------------------------------
# convergence diagnostics


def spectral_variance(x: np.ndarray, lag_fraction: float = 0.04) -> float:
    """Spectral density at frequency zero via a Bartlett lag window."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    centered = x - x.mean()
    gamma0 = float(centered @ centered) / n
    if gamma0 == 0.0:
        return 0.0
    n_lags = int(lag_fraction * n)
    total = gamma0
    for k in range(1, n_lags + 1):
        gamma_k = float(centered[:-k] @ centered[k:]) / n
        total += 2.0 * (1.0 - k / (n_lags + 1.0)) * gamma_k
    return total if total > 0 else gamma0


def geweke_diag(chain, frac_a: float = 0.1, frac_b: float = 0.5) -> float:
    """Z-score comparing the means of an early and a late chain segment.

    A constant chain scores 0 by convention.
    """
    chain = np.asarray(chain, dtype=np.float64)
    n = chain.shape[0]
    n_a = max(int(frac_a * n), 1)
    n_b = max(int(frac_b * n), 1)
    seg_a = chain[:n_a]
    seg_b = chain[n - n_b :]
    var = spectral_variance(seg_a) / n_a + spectral_variance(seg_b) / n_b
    if var == 0.0:
        return 0.0
    return float((seg_a.mean() - seg_b.mean()) / math.sqrt(var))


def geweke_table(samples: PosteriorSamples, frac_a: float = 0.1, frac_b: float = 0.5) -> dict:
    """Geweke z per stored parameter column (plus the log posterior)."""
    table = {"logpost": geweke_diag(samples.logpost, frac_a, frac_b)}
    for name in samples.names:
        table[name] = geweke_diag(samples.column(name), frac_a, frac_b)
    return table
