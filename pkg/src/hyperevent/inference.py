"""Metropolis-within-Gibbs posterior sampling.

The chain state holds the coefficient blocks plus, per event, the full
matrix of latent candidate receiver sets. One outer iteration performs, in
fixed order: a systematic Gibbs sweep over every latent receiver indicator
(observed rows stay pinned), a block of random-walk Metropolis updates for
the receiver coefficients, a block for the timing coefficients, and one
update of the timing auxiliary parameter (proposed on the log scale with
the Jacobian correction).

The receiver-coefficient target factorizes over events and candidate rows:
each non-empty row contributes its linear score minus the log-normalizer of
the non-empty Bernoulli law. The timing target couples the winning
initiator's waiting-time density with the survival of every other
candidate past the observed increment; when several events share an exact
timestamp the likelihood is taken over unique timepoints, with the tied
initiators' densities and the remaining candidates' survivals evaluated at
the gap between consecutive unique timepoints. With no ties the grouped
form reduces to the per-event form exactly.

Proposal scales can adapt during burn-in (Robbins-Monro toward standard
acceptance targets) and are frozen afterwards, so stored draws come from a
fixed transition kernel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import Dataset, TieGrouping, tie_grouping, time_increments
from .errors import ConfigError, DataValidationError, NumericalError
from .features import FeatureSpec, build_feature_arrays
from .nonempty_bernoulli import softplus
from .params import ModelParams, PriorSpec
from .timing import TimingModel, apply_link, log_pdf, log_survival

ADAPT_TARGET_VECTOR = 0.234
ADAPT_TARGET_SCALAR = 0.44


@dataclass(frozen=True)
class McmcConfig:
    """Iteration schedule, proposal scales, and seed for one chain."""

    outer: int
    burn_in: int = 0
    thin: int = 1
    inner_b: int = 20
    inner_eta: int = 10
    scale_b: float = 0.1
    scale_eta: float = 0.1
    scale_aux: float = 0.4
    adapt: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.outer < self.burn_in or self.burn_in < 0:
            raise ConfigError("need outer >= burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thinning stride must be >= 1")
        if min(self.scale_b, self.scale_eta, self.scale_aux) <= 0:
            raise ConfigError("proposal scales must be positive")
        if self.inner_b < 1 or self.inner_eta < 1:
            raise ConfigError("inner iteration counts must be >= 1")

    @property
    def n_stored(self) -> int:
        return (self.outer - self.burn_in) // self.thin


def _default_log_normalizer(s: np.ndarray) -> np.ndarray:
    return s + np.log(-np.expm1(-s))


class ReceiverLikelihood:
    """Receiver-selection log-likelihood over precomputed feature tensors.

    ``x`` has shape (E, A, A, P). The latent indicator tensor enters only
    through its feature-weighted sum, which callers recompute once per
    latent sweep and reuse across the Metropolis proposals of one block.
    ``log_normalizer_fn`` exists so correctness harnesses can inject a
    deliberately broken normalizer; production code never overrides it.
    """

    def __init__(self, x: np.ndarray, log_normalizer_fn=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1] != x.shape[2]:
            raise DataValidationError("receiver features must have shape (E, A, A, P)")
        self.n_events, self.n_nodes = x.shape[0], x.shape[1]
        self.n_features = x.shape[3]
        self.x_flat = np.ascontiguousarray(x.reshape(-1, self.n_features))
        self.offdiag = ~np.eye(self.n_nodes, dtype=bool)
        # hot path works on the off-diagonal slots only: (E*A, A-1) rows
        self.x_flat_offdiag = np.ascontiguousarray(
            x[:, self.offdiag, :].reshape(-1, self.n_features)
        )
        self._logz = log_normalizer_fn or _default_log_normalizer

    def compress(self, u: np.ndarray) -> np.ndarray:
        """Drop the structural diagonal: (E, A, A) -> flat off-diagonal."""
        return u[:, self.offdiag].reshape(-1).astype(np.float64)

    def weighted_sum(self, u: np.ndarray) -> np.ndarray:
        """Feature total over selected indicators: sum_{e,i,j} u_iej x_iej."""
        return self.x_flat_offdiag.T @ self.compress(u)

    def lam(self, coef: np.ndarray) -> np.ndarray:
        """Intensity tensor (E, A, A) for the given coefficients."""
        return (self.x_flat @ coef).reshape(self.n_events, self.n_nodes, self.n_nodes)

    def _row_softplus_sums(self, lam_flat: np.ndarray) -> np.ndarray:
        return softplus(lam_flat).reshape(-1, self.n_nodes - 1).sum(axis=1)

    def loglik(self, coef: np.ndarray, weighted: np.ndarray) -> float:
        lam_flat = self.x_flat_offdiag @ coef
        s = self._row_softplus_sums(lam_flat)
        return float(weighted @ coef) - float(self._logz(s).sum())

    def grad_loglik(self, coef: np.ndarray, weighted: np.ndarray) -> np.ndarray:
        """Analytic gradient of :meth:`loglik` in the coefficients."""
        lam_flat = self.x_flat_offdiag @ coef
        rows = expit(lam_flat).reshape(-1, self.n_nodes - 1)
        occupancy = 1.0 / (-np.expm1(-self._row_softplus_sums(lam_flat)))
        return weighted - self.x_flat_offdiag.T @ (rows * occupancy[:, None]).reshape(-1)


def log_posterior_b(coef, u, x, prior: PriorSpec) -> float:
    """Receiver-coefficient conditional log-posterior (up to a constant)."""
    rl = ReceiverLikelihood(x)
    return rl.loglik(np.asarray(coef, float), rl.weighted_sum(u)) + prior.logpdf_b(coef)


class TimingLikelihood:
    """Event-timing log-likelihood with tie-aware structure precomputed.

    Density terms use each event's own feature row; survival terms for the
    candidates that did not fire are evaluated once per unique timepoint on
    the feature rows of that timepoint's first event.
    """

    def __init__(self, y, senders, times, t0, model: TimingModel):
        y = np.asarray(y, dtype=np.float64)
        self.n_events, self.n_nodes, self.n_features = y.shape
        self.y_flat = y.reshape(-1, self.n_features)
        self.senders = np.asarray(senders, dtype=np.int64)
        self.model = model
        unique, first_idx, inverse = np.unique(times, return_index=True, return_inverse=True)
        gaps = np.diff(unique, prepend=float(t0))
        if np.any(gaps <= 0):
            raise DataValidationError(
                "malformed grouping: a unique-timepoint increment is not positive"
            )
        self.delta_events = gaps[inverse]
        self.survival_rows = first_idx
        self.survival_delta = gaps
        mask = np.ones((unique.shape[0], self.n_nodes), dtype=bool)
        mask[inverse, self.senders] = False
        self.survival_mask = mask

    def loglik(self, eta: np.ndarray, aux: float | None) -> float:
        model = self.model.with_aux(aux) if self.model.has_aux else self.model
        mu = apply_link(self.y_flat @ eta, model.link).reshape(self.n_events, self.n_nodes)
        logf = log_pdf(self.delta_events, mu[np.arange(self.n_events), self.senders], model)
        ls = log_survival(self.survival_delta[:, None], mu[self.survival_rows], model)
        surv = np.where(self.survival_mask, ls, 0.0).sum()
        return float(np.sum(logf) + surv)


def timing_loglik_untied(eta, aux, y, senders, increments, model: TimingModel) -> float:
    """Per-event timing log-likelihood; requires strictly positive
    increments (i.e. no tied timestamps)."""
    y = np.asarray(y, dtype=np.float64)
    senders = np.asarray(senders, dtype=np.int64)
    increments = np.asarray(increments, dtype=np.float64)
    n_events, n_nodes, q = y.shape
    model = model.with_aux(aux) if model.has_aux else model
    mu = apply_link(y.reshape(-1, q) @ np.asarray(eta, float), model.link).reshape(
        n_events, n_nodes
    )
    logf = log_pdf(increments, mu[np.arange(n_events), senders], model)
    ls = log_survival(increments[:, None], mu, model)
    mask = np.ones((n_events, n_nodes), dtype=bool)
    mask[np.arange(n_events), senders] = False
    return float(np.sum(logf) + np.where(mask, ls, 0.0).sum())


def timing_loglik_grouped(eta, aux, y, senders, times, t0, model: TimingModel) -> float:
    """Unique-timepoint timing log-likelihood (handles tied timestamps)."""
    tl = TimingLikelihood(y, senders, times, t0, model)
    return tl.loglik(np.asarray(eta, float), aux)


def log_posterior_eta(eta, aux, ds: Dataset, y, model, prior: PriorSpec, ties=None) -> float:
    """Timing-coefficient conditional log-posterior (up to a constant)."""
    tl = TimingLikelihood(y, ds.senders, ds.times, ds.t0, model)
    return tl.loglik(np.asarray(eta, float), aux) + prior.logpdf_eta(eta)


def gibbs_sweep(u: np.ndarray, probs: np.ndarray, pinned: np.ndarray, rng) -> None:
    """One systematic scan of every free latent receiver indicator.

    ``u`` is updated in place. ``probs`` holds sigmoid intensities per
    (event, row, slot); a coordinate whose row would otherwise go empty is
    set with probability one. Rows flagged in ``pinned`` (the observed
    initiators) and the structural diagonal are never touched. Coordinates
    inside a row are scanned sequentially; rows are conditionally
    independent, so they advance together.
    """
    n_events, n_nodes, _ = u.shape
    rowsum = u.sum(axis=2, dtype=np.int64)
    unif = rng.random((n_events, n_nodes, n_nodes))
    slots = np.arange(n_nodes)
    for j in range(n_nodes):
        old = u[:, :, j]
        rest = rowsum - old
        p = np.where(rest > 0, probs[:, :, j], 1.0)
        proposed = (unif[:, :, j] < p).astype(np.uint8)
        editable = (~pinned) & (slots != j)[None, :]
        new = np.where(editable, proposed, old)
        rowsum += new.astype(np.int64) - old.astype(np.int64)
        u[:, :, j] = new


def update_latent_receivers(u, lam, pinned, rng) -> None:
    """Gibbs sweep given raw intensities (convenience wrapper)."""
    gibbs_sweep(u, expit(lam), pinned, rng)


def init_latents(receivers: np.ndarray, senders: np.ndarray, rng) -> np.ndarray:
    """Initial latent tensor: zero-intensity draws with observed rows pinned."""
    from .nonempty_bernoulli import sample_rows

    n_events, n_nodes = receivers.shape
    offdiag = ~np.eye(n_nodes, dtype=bool)
    rows = sample_rows(
        np.zeros((n_events * n_nodes, n_nodes)),
        rng,
        np.broadcast_to(offdiag, (n_events, n_nodes, n_nodes)).reshape(-1, n_nodes),
    )
    u = rows.reshape(n_events, n_nodes, n_nodes)
    u[np.arange(n_events), senders] = receivers
    return u


def mh_step(value, current_lp: float, logpost_fn, scale: float, rng, positive: bool = False):
    """One random-walk Metropolis step.

    Positive scalars are proposed on the log scale, with the Jacobian
    folded into the acceptance ratio so the target is preserved on the
    original scale. Returns (value, log-posterior, accepted).
    """
    if positive:
        proposal = float(value) * math.exp(scale * rng.standard_normal())
        jacobian = math.log(proposal) - math.log(value)
    else:
        value = np.asarray(value, dtype=np.float64)
        proposal = value + scale * rng.standard_normal(value.shape)
        jacobian = 0.0
    lp_prop = logpost_fn(proposal)
    delta = lp_prop - current_lp + jacobian
    if math.log(rng.random()) <= delta:
        return proposal, lp_prop, True
    return value, current_lp, False


@dataclass
class _BlockStats:
    target: float
    log_scale: float
    steps: int = 0
    accepts: int = 0
    post_accepts: int = 0
    post_steps: int = 0

    def record(self, accepted: bool, adapt: bool, post_burn: bool):
        self.steps += 1
        self.accepts += accepted
        if post_burn:
            self.post_steps += 1
            self.post_accepts += accepted
        elif adapt:
            self.log_scale += (float(accepted) - self.target) * self.steps ** -0.6

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    def rates(self) -> dict:
        overall = self.accepts / self.steps if self.steps else float("nan")
        post = self.post_accepts / self.post_steps if self.post_steps else float("nan")
        return {"overall": overall, "post_burn_in": post}


@dataclass
class ChainState:
    """Full sampler state: coefficients, latent tensors, bookkeeping."""

    params: ModelParams
    u: np.ndarray
    pinned: np.ndarray
    blocks: dict = field(default_factory=dict)


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws plus run metadata."""

    names: tuple[str, ...]
    draws: np.ndarray
    logpost: np.ndarray
    iters: np.ndarray
    acceptance: dict
    scales: dict

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def write_csv(self, path) -> None:
        has_aux = "aux" in self.names
        header = ["iter", "logpost"] + list(self.names) + ([] if has_aux else ["aux"])
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for k in range(self.draws.shape[0]):
                row = [int(self.iters[k]), repr(float(self.logpost[k]))]
                row += [repr(float(v)) for v in self.draws[k]]
                if not has_aux:
                    row.append("")
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "PosteriorSamples":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        if header[:2] != ["iter", "logpost"]:
            raise DataValidationError(f"{path}: not a posterior draw table")
        names = header[2:]
        if rows and names and names[-1] == "aux" and rows[0][-1] == "":
            names = names[:-1]
        iters = np.array([int(r[0]) for r in rows], dtype=np.int64)
        logpost = np.array([float(r[1]) for r in rows])
        draws = np.array([[float(v) for v in r[2 : 2 + len(names)]] for r in rows])
        draws = draws.reshape(len(rows), len(names))
        return cls(tuple(names), draws, logpost, iters, {}, {})


def run_mcmc(
    ds: Dataset,
    features,
    model: TimingModel,
    priors: PriorSpec,
    config: McmcConfig,
    rng: np.random.Generator | None = None,
    log_normalizer_fn=None,
) -> PosteriorSamples:
    """Run one chain and return the thinned post-burn-in draws.

    ``features`` is a FeatureSpec (tensors are built from the dataset) or a
    prebuilt ``(x, y)`` pair. The chain is fully determined by the config
    seed unless an explicit generator is passed.
    """
    if isinstance(features, FeatureSpec):
        x, y = build_feature_arrays(ds, features)
    else:
        x, y = features
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state, rl, tl = _init_chain(ds, x, y, model, priors, config, rng, log_normalizer_fn=log_normalizer_fn)
    names = _param_names(rl.n_features, tl.n_features, model.has_aux)
    stored = np.empty((config.n_stored, len(names)))
    stored_lp = np.empty(config.n_stored)
    stored_iter = np.empty(config.n_stored, dtype=np.int64)
    k = 0
    for o in range(1, config.outer + 1):
        post_burn = o > config.burn_in
        ll_recv, ll_time = _outer_iteration(state, rl, tl, priors, config, rng, post_burn)
        if post_burn and (o - config.burn_in) % config.thin == 0:
            p = state.params
            row = list(p.b) + list(p.eta) + ([p.aux] if model.has_aux else [])
            stored[k] = row
            stored_lp[k] = (
                ll_recv
                + ll_time
                + priors.logpdf_b(p.b)
                + priors.logpdf_eta(p.eta)
                + (priors.logpdf_aux(p.aux) if model.has_aux else 0.0)
            )
            stored_iter[k] = o
            k += 1
    acceptance = {name: block.rates() for name, block in state.blocks.items()}
    scales = {name: block.scale for name, block in state.blocks.items()}
    return PosteriorSamples(names, stored[:k], stored_lp[:k], stored_iter[:k], acceptance, scales)


def _param_names(p: int, q: int, has_aux: bool) -> tuple[str, ...]:
    names = [f"b_{i + 1}" for i in range(p)] + [f"eta_{i + 1}" for i in range(q)]
    if has_aux:
        names.append("aux")
    return tuple(names)


def _init_chain(
    ds, x, y, model, priors, config, rng,
    init_params: ModelParams | None = None,
    log_normalizer_fn=None,
):
    rl = ReceiverLikelihood(x, log_normalizer_fn=log_normalizer_fn)
    tl = TimingLikelihood(y, ds.senders, ds.times, ds.t0, model)
    if init_params is None:
        aux0 = 1.0 if model.has_aux else None
        init_params = ModelParams(np.zeros(rl.n_features), np.zeros(tl.n_features), aux0)
    u = init_latents(ds.receivers, ds.senders, rng)
    pinned = np.zeros((ds.n_events, ds.n_nodes), dtype=bool)
    pinned[np.arange(ds.n_events), ds.senders] = True
    state = ChainState(init_params, u, pinned)
    state.blocks = {
        "b": _BlockStats(ADAPT_TARGET_VECTOR, math.log(config.scale_b)),
        "eta": _BlockStats(ADAPT_TARGET_VECTOR, math.log(config.scale_eta)),
    }
    if model.has_aux:
        state.blocks["aux"] = _BlockStats(ADAPT_TARGET_SCALAR, math.log(config.scale_aux))
    ll0 = rl.loglik(init_params.b, rl.weighted_sum(u)) + tl.loglik(init_params.eta, init_params.aux)
    if not math.isfinite(ll0):
        raise NumericalError("log-posterior is not finite at initialization")
    return state, rl, tl


def _outer_iteration(state: ChainState, rl, tl, priors, config, rng, post_burn: bool):
    """One full transition: latent sweep, then the three Metropolis blocks.

    Returns the receiver and timing log-likelihood pieces at the new state.
    """
    p = state.params
    gibbs_sweep(state.u, expit(rl.lam(p.b)), state.pinned, rng)
    weighted = rl.weighted_sum(state.u)

    block = state.blocks["b"]
    lp = rl.loglik(p.b, weighted) + priors.logpdf_b(p.b)
    for _ in range(config.inner_b):
        p.b, lp, acc = mh_step(
            p.b, lp, lambda v: rl.loglik(v, weighted) + priors.logpdf_b(v), block.scale, rng
        )
        block.record(acc, config.adapt, post_burn)
    ll_recv = lp - priors.logpdf_b(p.b)

    block = state.blocks["eta"]
    lp = tl.loglik(p.eta, p.aux) + priors.logpdf_eta(p.eta)
    for _ in range(config.inner_eta):
        p.eta, lp, acc = mh_step(
            p.eta, lp, lambda v: tl.loglik(v, p.aux) + priors.logpdf_eta(v), block.scale, rng
        )
        block.record(acc, config.adapt, post_burn)
    ll_time = lp - priors.logpdf_eta(p.eta)

    if "aux" in state.blocks:
        block = state.blocks["aux"]
        lp = ll_time + priors.logpdf_aux(p.aux)
        p.aux, lp, acc = mh_step(
            p.aux,
            lp,
            lambda v: tl.loglik(p.eta, v) + priors.logpdf_aux(v),
            block.scale,
            rng,
            positive=True,
        )
        block.record(acc, config.adapt, post_burn)
        ll_time = lp - priors.logpdf_aux(p.aux)
    return ll_recv, ll_time
