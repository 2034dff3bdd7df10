"""Hyperedge event streams: simulation, Bayesian inference, evaluation."""

from .data import (
    Dataset,
    EventRecord,
    NodeTable,
    TieGrouping,
    load_events,
    load_nodes,
    synthetic_nodes,
    tie_grouping,
    time_increments,
    write_events,
    write_nodes,
)
from .evaluation import (
    HoldoutMask,
    PredictConfig,
    PredictionReport,
    f1_score,
    geweke_diag,
    impute_increment,
    impute_receiver,
    impute_sender,
    make_holdout,
    mdape,
    ppc_run,
    predict,
    sender_posterior,
)
from .features import FeatureSpec, build_feature_arrays, receiver_features, timing_features
from .generator import (
    CandidateDraw,
    FixedFeatures,
    HistoryFeatures,
    draw_candidates,
    generate_event,
    simulate,
    simulate_reversed,
)
from .gir import GirConfig, GirReport, run as run_gir
from .inference import (
    McmcConfig,
    PosteriorSamples,
    log_posterior_b,
    log_posterior_eta,
    run_mcmc,
)
from .params import ModelParams, PriorSpec
from .timing import TimingModel, log_pdf, log_survival, mean_param, sample_increment

__version__ = "0.1.0"
