"""Command-line surface tying the modules into reproducible pipelines.

Subcommands: ``simulate``, ``fit``, ``gir``, ``predict``, ``ppc``,
``diagnose``. Each takes ``--config`` (YAML) plus optional ``--set``
overrides, writes its artifacts under the configured output directory, and
logs progress to stderr only. Exit codes: 0 success, 2 configuration
error, 3 data validation error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import config as config_mod
from .data import (
    Dataset,
    load_events,
    load_nodes,
    synthetic_nodes,
    write_events,
    write_nodes,
)
from .errors import ConfigError, DataValidationError, HyperEventError, NumericalError
from .evaluation import geweke_table, make_holdout, ppc_run, predict
from .generator import HistoryFeatures, simulate
from .gir import run as run_gir
from .inference import PosteriorSamples, run_mcmc
from .params import ModelParams

log = logging.getLogger("hyperevent")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _out(cfg, name: str) -> str:
    os.makedirs(cfg.paths.output_dir, exist_ok=True)
    return os.path.join(cfg.paths.output_dir, name)


def _load_dataset(cfg) -> Dataset:
    if not cfg.paths.nodes or not cfg.paths.events:
        raise ConfigError("paths.nodes and paths.events are required for this command")
    for path in (cfg.paths.nodes, cfg.paths.events):
        if not os.path.exists(path):
            raise DataValidationError(f"input file not found: {path}")
    nodes = load_nodes(cfg.paths.nodes)
    return load_events(cfg.paths.events, nodes, cfg.t0, cfg.epoch)


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_simulate(cfg) -> int:
    sim = cfg.simulate
    if cfg.paths.nodes:
        nodes = load_nodes(cfg.paths.nodes)
    elif sim.n_nodes:
        nodes = synthetic_nodes(sim.n_nodes)
    else:
        raise ConfigError("simulate needs paths.nodes or simulate.n_nodes")
    params = ModelParams(np.asarray(sim.b), np.asarray(sim.eta), sim.aux)
    if params.b.shape[0] != cfg.features.n_receiver:
        raise ConfigError(
            f"simulate.b has {params.b.shape[0]} entries but the feature spec selects "
            f"{cfg.features.n_receiver} receiver statistics"
        )
    if params.eta.shape[0] != cfg.features.n_timing:
        raise ConfigError(
            f"simulate.eta has {params.eta.shape[0]} entries but the feature spec selects "
            f"{cfg.features.n_timing} timing statistics"
        )
    if cfg.model.has_aux and sim.aux is None:
        raise ConfigError(f"the {cfg.model.family} family needs simulate.aux")
    rng = np.random.default_rng(cfg.seed)
    source = HistoryFeatures(cfg.features, cfg.epoch)
    ds, draws = simulate(sim.n_events, nodes, params, source, cfg.model, cfg.t0, rng)
    write_events(ds, _out(cfg, "events.csv"))
    write_nodes(nodes, _out(cfg, "nodes.csv"))
    log.info("wrote %d events for %d nodes", ds.n_events, nodes.n_nodes)
    if sim.latent_dump:
        _dump_latents(cfg, nodes, draws, _out(cfg, sim.latent_dump))
    return 0


def _dump_latents(cfg, nodes, draws, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event", "initiator", "tau"] + [f"u_{lab}" for lab in nodes.labels])
        for e, draw in enumerate(draws):
            for i in range(nodes.n_nodes):
                writer.writerow(
                    [e, i, repr(float(draw.tau[i]))] + [int(v) for v in draw.u[i]]
                )


def cmd_fit(cfg) -> int:
    ds = _load_dataset(cfg)
    log.info("fitting %d events, %d nodes", ds.n_events, ds.n_nodes)
    samples = run_mcmc(ds, cfg.features, cfg.model, cfg.priors, cfg.mcmc)
    samples.write_csv(_out(cfg, "posterior.csv"))
    _write_json(
        _out(cfg, "acceptance.json"),
        {
            "acceptance": samples.acceptance,
            "proposal_scales": samples.scales,
            "n_stored": int(samples.draws.shape[0]),
            "seed": cfg.seed,
        },
    )
    log.info("stored %d draws", samples.draws.shape[0])
    return 0


def cmd_gir(cfg) -> int:
    report = run_gir(cfg.gir, cfg.seed)
    report.write_json(_out(cfg, "gir_report.json"))
    for name in report.names:
        per = report.per_statistic[name]
        with open(_out(cfg, f"gir_pp_{name}.csv"), "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["p_forward", "p_backward"])
            for xv, yv in zip(per["pp_forward"], per["pp_backward"]):
                writer.writerow([repr(float(xv)), repr(float(yv))])
    worst = max(report.summary().items(), key=lambda kv: kv[1]["max_pp_deviation"])
    log.info("gir done; worst P-P deviation %s=%.4f", worst[0], worst[1]["max_pp_deviation"])
    return 0


def cmd_predict(cfg) -> int:
    ds = _load_dataset(cfg)
    mask = make_holdout(ds, cfg.predict_fraction, cfg.seed)
    report = predict(ds, mask, cfg.features, cfg.model, cfg.priors, cfg.predict)
    report.write_json(_out(cfg, "prediction.json"))
    report.write_positions_csv(_out(cfg, "prediction_positions.csv"))
    log.info(
        "prediction done; mean correct-sender probability %.4f over %d masked senders",
        report.sender_prob_overall,
        report.sender_events.size,
    )
    return 0


def cmd_ppc(cfg) -> int:
    ds = _load_dataset(cfg)
    posterior_path = cfg.paths.posterior or os.path.join(cfg.paths.output_dir, "posterior.csv")
    if not os.path.exists(posterior_path):
        raise DataValidationError(f"posterior draws not found: {posterior_path}")
    samples = PosteriorSamples.read_csv(posterior_path)
    result = ppc_run(samples, ds, cfg.features, cfg.model, cfg.ppc_sims, cfg.seed, cfg.threads)
    paths = result.write_csv_tables(cfg.paths.output_dir)
    log.info("ppc wrote %s", ", ".join(os.path.basename(p) for p in paths))
    return 0


def cmd_diagnose(cfg) -> int:
    posterior_path = cfg.paths.posterior or os.path.join(cfg.paths.output_dir, "posterior.csv")
    if not os.path.exists(posterior_path):
        raise DataValidationError(f"posterior draws not found: {posterior_path}")
    samples = PosteriorSamples.read_csv(posterior_path)
    table = geweke_table(samples)
    with open(_out(cfg, "geweke.csv"), "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "z"])
        for name, z in table.items():
            writer.writerow([name, repr(float(z))])
    log.info("geweke diagnostics for %d chains written", len(table))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "gir": cmd_gir,
    "predict": cmd_predict,
    "ppc": cmd_ppc,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperevent",
        description="simulate, fit, test, and evaluate hyperedge event models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="override one config key (repeatable)",
        )
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker cap")
        p.add_argument("--output-dir", default=None, help="override paths.output_dir")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.output_dir is not None:
        overrides.append(f"paths.output_dir={args.output_dir}")
    try:
        cfg = config_mod.load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataValidationError as exc:
        log.error("data validation error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except HyperEventError as exc:  # pragma: no cover
        log.error("error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
