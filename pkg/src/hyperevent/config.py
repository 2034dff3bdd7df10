"""Run configuration: one YAML document drives every CLI command.

The file is a nested key-value document; ``--set section.key=value`` flags
override single keys. Every command is a pure function of (config, input
files, seed), so reruns with the same inputs are byte-identical. The seed
is mandatory: there is no wall-clock fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime

import yaml

from .errors import ConfigError
from .evaluation import PredictConfig
from .features import FeatureSpec
from .gir import GirConfig
from .inference import McmcConfig
from .params import PriorSpec
from .timing import TimingModel


@dataclass(frozen=True)
class PathsConfig:
    nodes: str | None = None
    events: str | None = None
    output_dir: str = "."
    posterior: str | None = None


@dataclass(frozen=True)
class SimulateConfig:
    n_events: int = 0
    n_nodes: int | None = None
    b: tuple = ()
    eta: tuple = ()
    aux: float | None = None
    latent_dump: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "eta", tuple(float(v) for v in self.eta))
        if self.n_events < 0:
            raise ConfigError("simulate.n_events must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    threads: int
    paths: PathsConfig
    t0: float
    epoch: datetime | None
    features: FeatureSpec
    model: TimingModel
    priors: PriorSpec
    mcmc: McmcConfig
    gir: GirConfig
    simulate: SimulateConfig
    predict: PredictConfig
    predict_fraction: float
    ppc_sims: int


def _take(section: dict, name: str) -> dict:
    block = section.pop(name, {}) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return block


def _build(cls, block: dict, name: str, **extra):
    merged = {**block, **extra}
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from None


def _parse_epoch(raw) -> datetime | None:
    if raw is None:
        return None
    try:
        return datetime.fromisoformat(str(raw))
    except ValueError:
        raise ConfigError(f"epoch {raw!r} is not ISO-8601") from None


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings onto the parsed document."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = doc
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-mapping")
        node[keys[-1]] = yaml.safe_load(raw)
    return doc


def from_document(doc: dict) -> RunConfig:
    doc = dict(doc or {})
    if "seed" not in doc:
        raise ConfigError("the configuration must set an explicit seed")
    seed = int(doc.pop("seed"))
    threads = int(doc.pop("threads", os.cpu_count() or 1))
    if threads < 1:
        raise ConfigError("threads must be >= 1")

    paths = _build(PathsConfig, _take(doc, "paths"), "paths")
    time_block = _take(doc, "time")
    t0 = float(time_block.pop("t0", 0.0))
    epoch = _parse_epoch(time_block.pop("epoch", None))
    if time_block:
        raise ConfigError(f"unknown keys in time section: {sorted(time_block)}")

    feat_block = _take(doc, "features")
    for key in ("receiver", "timing"):
        if key in feat_block:
            feat_block[key] = tuple(feat_block[key])
    features = _build(FeatureSpec, feat_block, "features")

    model = _build(TimingModel, _take(doc, "timing_model"), "timing_model")
    priors = _build(PriorSpec, _take(doc, "priors"), "priors")
    mcmc = _build(McmcConfig, {"outer": 1000, **_take(doc, "mcmc")}, "mcmc", seed=seed)
    gir = _build(GirConfig, _take(doc, "gir"), "gir")
    simulate = _build(SimulateConfig, _take(doc, "simulate"), "simulate")

    predict_block = _take(doc, "predict")
    fraction = float(predict_block.pop("fraction", 0.1))
    predict = _build(PredictConfig, predict_block, "predict", seed=seed)

    ppc_block = _take(doc, "ppc")
    ppc_sims = int(ppc_block.pop("n_sims", 500))
    if ppc_block:
        raise ConfigError(f"unknown keys in ppc section: {sorted(ppc_block)}")
    if doc:
        raise ConfigError(f"unknown top-level config keys: {sorted(doc)}")
    return RunConfig(
        seed=seed,
        threads=threads,
        paths=paths,
        t0=t0,
        epoch=epoch,
        features=features,
        model=model,
        priors=priors,
        mcmc=mcmc,
        gir=gir,
        simulate=simulate,
        predict=predict,
        predict_fraction=fraction,
        ppc_sims=ppc_sims,
    )


def load_config(path, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("the config document must be a mapping")
    return from_document(apply_overrides(doc, overrides or []))
