"""Joint-distribution correctness testing of the posterior sampler.

Two samplers target the same joint law over (parameters, latents, data).
The forward sampler draws parameters from their priors and runs the
generative process. The backward sampler starts from one forward draw and
then alternates a posterior transition (one full outer iteration of the
inference chain, holding the data fixed) with a fresh regeneration of the
data and latent candidate tensors from the generative process given the
current parameters. If the transition operator is derived and implemented
correctly, both samplers share the same stationary joint distribution, so
every scalar functional of a round must match in distribution.

Tracked statistics per round: mean and variance of the observed receiver-set
sizes, mean and variance of the time increments, every receiver coefficient,
every timing coefficient, and the timing auxiliary parameter when the family
has one.

Covariates are synthetic and history-independent here (intercept plus
standard-normal columns drawn once from a dedicated seed), which keeps the
data-regeneration step an exact conditional draw and isolates the sampler
itself. Distributions are compared with two-sample t and Mann-Whitney tests
(normal approximation with tie correction) plus a probability-probability
curve on a 1,000-quantile grid.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import expit

from .data import time_increments
from .errors import ConfigError
from .generator import FixedFeatures, simulate
from .inference import (
    ChainState,
    McmcConfig,
    ReceiverLikelihood,
    TimingLikelihood,
    _BlockStats,
    _outer_iteration,
    ADAPT_TARGET_SCALAR,
    ADAPT_TARGET_VECTOR,
)
from .params import ModelParams, PriorSpec
from .data import synthetic_nodes
from .timing import TimingModel

import math


@dataclass(frozen=True)
class GirConfig:
    """Scale and schedule of one joint-distribution test run."""

    n_events: int = 100
    n_nodes: int = 5
    n_receiver_features: int = 4
    n_timing_features: int = 3
    family: str = "lognormal"
    rounds: int = 100_000
    thin_start: int = 10_000
    thin_stride: int = 9
    covariate_seed: int = 1
    inner_b: int = 20
    inner_eta: int = 10
    scale_b: float = 0.15
    scale_eta: float = 0.1
    scale_aux: float = 0.3
    prior_sd_b: float = 0.2
    prior_sd_eta: float = 0.2
    prior_aux_shape: float = 20.0
    prior_aux_scale: float = 19.0

    def __post_init__(self):
        if self.rounds < self.thin_start:
            raise ConfigError("rounds must be at least the thinning start")
        if self.thin_stride < 1:
            raise ConfigError("thinning stride must be >= 1")
        if self.n_nodes < 2 or self.n_events < 1:
            raise ConfigError("need at least 2 nodes and 1 event")

    @property
    def timing_model(self) -> TimingModel:
        aux = 1.0 if self.family != "exponential" else None
        return TimingModel(self.family, aux=aux)

    def prior_spec(self) -> PriorSpec:
        """Harness priors for both samplers.

        These are deliberately tighter than typical analysis priors: the
        successive-conditional chain's autocorrelation time scales with the
        prior-to-posterior variance ratio, so a diffuse prior over an
        informative synthetic dataset would leave the thinned rounds far
        too dependent for the calibrated location tests to be meaningful.
        The harness tests operator correctness, which is prior-free.
        """
        return PriorSpec(
            b_var=self.prior_sd_b ** 2,
            eta_var=self.prior_sd_eta ** 2,
            aux_shape=self.prior_aux_shape,
            aux_scale=self.prior_aux_scale,
        )

    def statistic_names(self) -> tuple[str, ...]:
        names = [
            "mean_receiver_size",
            "var_receiver_size",
            "mean_increment",
            "var_increment",
        ]
        names += [f"b_{i + 1}" for i in range(self.n_receiver_features)]
        names += [f"eta_{i + 1}" for i in range(self.n_timing_features)]
        if self.timing_model.has_aux:
            names.append("aux")
        return tuple(names)


def synthetic_covariates(cfg: GirConfig) -> FixedFeatures:
    """Intercept plus standard-normal feature columns, fixed per run."""
    rng = np.random.default_rng(cfg.covariate_seed)
    a, p, q = cfg.n_nodes, cfg.n_receiver_features, cfg.n_timing_features
    x = np.concatenate([np.ones((a, a, 1)), rng.standard_normal((a, a, p - 1))], axis=2)
    y = np.concatenate([np.ones((a, 1)), rng.standard_normal((a, q - 1))], axis=1)
    return FixedFeatures(x, y)


def round_statistics(params: ModelParams, ds, has_aux: bool) -> np.ndarray:
    sizes = ds.receivers.sum(axis=1).astype(np.float64)
    taus = time_increments(ds)
    stats = [
        sizes.mean(),
        sizes.var(ddof=1),
        taus.mean(),
        taus.var(ddof=1),
        *params.b,
        *params.eta,
    ]
    if has_aux:
        stats.append(params.aux)
    return np.asarray(stats, dtype=np.float64)


def _forward_draw(cfg, covs, priors, model, rng):
    params = priors.draw_params(cfg.n_receiver_features, cfg.n_timing_features, model, rng)
    nodes = synthetic_nodes(cfg.n_nodes)
    ds, draws = simulate(cfg.n_events, nodes, params, covs, model, 0.0, rng)
    return params, ds, draws


def forward_round(cfg: GirConfig, covs, priors: PriorSpec, rng) -> np.ndarray:
    """One prior draw plus one generative run, reduced to statistics."""
    model = cfg.timing_model
    params, ds, _ = _forward_draw(cfg, covs, priors, model, rng)
    return round_statistics(params, ds, model.has_aux)


def forward_rounds(cfg, covs, priors, rng, rounds: int) -> np.ndarray:
    out = np.empty((rounds, len(cfg.statistic_names())))
    for k in range(rounds):
        out[k] = forward_round(cfg, covs, priors, rng)
    return out


def backward_chain(
    cfg: GirConfig,
    covs: FixedFeatures,
    priors: PriorSpec,
    rng,
    rounds: int | None = None,
    log_normalizer_fn=None,
) -> np.ndarray:
    """Successive-conditional sampler: record one statistics vector per round.

    ``log_normalizer_fn`` overrides the receiver-law normalizer inside the
    transition operator; harnesses use it to plant a known bug and confirm
    the test detects it.
    """
    rounds = cfg.rounds if rounds is None else rounds
    model = cfg.timing_model
    nodes = synthetic_nodes(cfg.n_nodes)
    e, a = cfg.n_events, cfg.n_nodes
    params, ds, draws = _forward_draw(cfg, covs, priors, model, rng)
    x_full = np.broadcast_to(covs.x, (e, a, a, covs.x.shape[2])).copy()
    y_full = np.broadcast_to(covs.y, (e, a, covs.y.shape[1])).copy()
    rl = ReceiverLikelihood(x_full, log_normalizer_fn=log_normalizer_fn)
    mcfg = McmcConfig(
        outer=1,
        inner_b=cfg.inner_b,
        inner_eta=cfg.inner_eta,
        scale_b=cfg.scale_b,
        scale_eta=cfg.scale_eta,
        scale_aux=cfg.scale_aux,
        adapt=False,
    )
    blocks = {
        "b": _BlockStats(ADAPT_TARGET_VECTOR, math.log(cfg.scale_b)),
        "eta": _BlockStats(ADAPT_TARGET_VECTOR, math.log(cfg.scale_eta)),
    }
    if model.has_aux:
        blocks["aux"] = _BlockStats(ADAPT_TARGET_SCALAR, math.log(cfg.scale_aux))
    state = ChainState(params, _stack_latents(draws), _pinned(ds), blocks)
    out = np.empty((rounds, len(cfg.statistic_names())))
    for k in range(rounds):
        tl = TimingLikelihood(y_full, ds.senders, ds.times, ds.t0, model)
        _outer_iteration(state, rl, tl, priors, mcfg, rng, post_burn=True)
        ds, draws = simulate(e, nodes, state.params, covs, model, 0.0, rng)
        state.u = _stack_latents(draws)
        state.pinned = _pinned(ds)
        out[k] = round_statistics(state.params, ds, model.has_aux)
    return out


def _stack_latents(draws) -> np.ndarray:
    return np.stack([d.u for d in draws]).astype(np.uint8)


def _pinned(ds) -> np.ndarray:
    pinned = np.zeros((ds.n_events, ds.n_nodes), dtype=bool)
    pinned[np.arange(ds.n_events), ds.senders] = True
    return pinned


def thin_rounds(arr: np.ndarray, start: int, stride: int) -> np.ndarray:
    """Retain every ``stride``-th round beginning at 0-based index ``start``."""
    return arr[start::stride]


N_QUANTILES = 1000


def _ecdf(sample_sorted: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.searchsorted(sample_sorted, grid, side="right") / sample_sorted.shape[0]


def compare_statistic(forward: np.ndarray, backward: np.ndarray) -> dict:
    """Two-sample location tests plus the P-P curve for one statistic."""
    f = np.asarray(forward, dtype=np.float64)
    b = np.asarray(backward, dtype=np.float64)
    if f.std() == 0.0 and b.std() == 0.0:
        t_p = mw_p = 1.0 if f.mean() == b.mean() else 0.0
    else:
        t_p = float(sps.ttest_ind(f, b, equal_var=False).pvalue)
        mw_p = float(sps.mannwhitneyu(f, b, alternative="two-sided", method="asymptotic").pvalue)
    levels = (np.arange(N_QUANTILES) + 0.5) / N_QUANTILES
    pooled = np.sort(np.concatenate([f, b]))
    grid = np.quantile(pooled, levels)
    fs, bs = np.sort(f), np.sort(b)
    pp_x = _ecdf(fs, grid)
    pp_y = _ecdf(bs, grid)
    return {
        "t_p": t_p,
        "mw_p": mw_p,
        "forward_quantiles": np.quantile(f, levels),
        "backward_quantiles": np.quantile(b, levels),
        "pp_forward": pp_x,
        "pp_backward": pp_y,
        "max_pp_deviation": float(np.abs(pp_x - pp_y).max()),
    }


@dataclass
class GirReport:
    """Per-statistic comparison of forward and backward samples."""

    names: tuple[str, ...]
    forward: np.ndarray
    backward: np.ndarray
    per_statistic: dict
    config: GirConfig

    def summary(self) -> dict:
        return {
            name: {
                "t_p": self.per_statistic[name]["t_p"],
                "mw_p": self.per_statistic[name]["mw_p"],
                "max_pp_deviation": self.per_statistic[name]["max_pp_deviation"],
            }
            for name in self.names
        }

    def as_dict(self) -> dict:
        out = {
            "config": asdict(self.config),
            "n_forward": int(self.forward.shape[0]),
            "n_backward": int(self.backward.shape[0]),
            "statistics": {},
        }
        for k, name in enumerate(self.names):
            per = self.per_statistic[name]
            out["statistics"][name] = {
                "t_p": per["t_p"],
                "mw_p": per["mw_p"],
                "max_pp_deviation": per["max_pp_deviation"],
                "forward_quantiles": per["forward_quantiles"].tolist(),
                "backward_quantiles": per["backward_quantiles"].tolist(),
                "forward_sample": self.forward[:, k].tolist(),
                "backward_sample": self.backward[:, k].tolist(),
            }
        return out

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def compare(forward: np.ndarray, backward: np.ndarray, cfg: GirConfig) -> GirReport:
    names = cfg.statistic_names()
    per = {name: compare_statistic(forward[:, k], backward[:, k]) for k, name in enumerate(names)}
    return GirReport(names, forward, backward, per, cfg)


def run(
    cfg: GirConfig,
    seed: int,
    priors: PriorSpec | None = None,
    log_normalizer_fn=None,
) -> GirReport:
    """Full protocol: forward rounds, backward chain, thinning, comparison.

    Forward rounds are independent draws, so all of them are kept; the
    backward chain is thinned from ``thin_start`` on with the configured
    stride to curb autocorrelation.
    """
    if priors is None:
        priors = cfg.prior_spec()
    root = np.random.SeedSequence(seed)
    fwd_rng, bwd_rng = (np.random.default_rng(s) for s in root.spawn(2))
    covs = synthetic_covariates(cfg)
    forward = forward_rounds(cfg, covs, priors, fwd_rng, cfg.rounds)
    backward = backward_chain(cfg, covs, priors, bwd_rng, log_normalizer_fn=log_normalizer_fn)
    retained = thin_rounds(backward, cfg.thin_start, cfg.thin_stride)
    return compare(forward, retained, cfg)
