"""Model coefficients and prior specification shared by the samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError
from .timing import TimingModel


@dataclass
class ModelParams:
    """Receiver-selection coefficients, timing coefficients, and the
    optional timing auxiliary parameter (variance or shape)."""

    b: np.ndarray
    eta: np.ndarray
    aux: float | None = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        self.eta = np.asarray(self.eta, dtype=np.float64)
        if self.aux is not None and not self.aux > 0:
            raise ConfigError("auxiliary parameter must be positive")


def effective_model(model: TimingModel, params: ModelParams) -> TimingModel:
    """Timing model carrying the live auxiliary value from the parameters."""
    if model.has_aux and params.aux is not None:
        return model.with_aux(float(params.aux))
    return model


def _gaussian_logpdf_diag(x, mean, var):
    x = np.asarray(x, dtype=np.float64)
    diff = x - mean
    if np.ndim(var) == 0:
        v = float(var)
        return -0.5 * (x.size * math.log(2.0 * math.pi * v) + float(diff @ diff) / v)
    var = np.asarray(var, dtype=np.float64)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * var) + diff * diff / var))


@dataclass(frozen=True)
class PriorSpec:
    """Independent Gaussian priors on both coefficient blocks plus an
    inverse-gamma prior on the timing auxiliary parameter.

    Means/variances may be scalars (broadcast) or per-coefficient vectors.
    ``uninformative=True`` switches every log-density to an improper flat
    prior; drawing from the prior is then unavailable.
    """

    b_mean: float | np.ndarray = 0.0
    b_var: float | np.ndarray = 2.0
    eta_mean: float | np.ndarray = 0.0
    eta_var: float | np.ndarray = 2.0
    aux_shape: float = 2.0
    aux_scale: float = 1.0
    uninformative: bool = False

    def __post_init__(self):
        if np.any(np.asarray(self.b_var) <= 0) or np.any(np.asarray(self.eta_var) <= 0):
            raise ConfigError("prior variances must be positive")
        if not (self.aux_shape > 0 and self.aux_scale > 0):
            raise ConfigError("inverse-gamma hyperparameters must be positive")

    def logpdf_b(self, b: np.ndarray) -> float:
        if self.uninformative:
            return 0.0
        return _gaussian_logpdf_diag(b, self.b_mean, self.b_var)

    def logpdf_eta(self, eta: np.ndarray) -> float:
        if self.uninformative:
            return 0.0
        return _gaussian_logpdf_diag(eta, self.eta_mean, self.eta_var)

    def logpdf_aux(self, aux: float) -> float:
        if self.uninformative:
            return 0.0
        a, s = self.aux_shape, self.aux_scale
        return float(a * math.log(s) - special.gammaln(a) - (a + 1.0) * math.log(aux) - s / aux)

    def _require_proper(self):
        if self.uninformative:
            raise ConfigError("cannot draw from an improper flat prior")

    def draw_b(self, n: int, rng: np.random.Generator) -> np.ndarray:
        self._require_proper()
        mean = np.broadcast_to(np.asarray(self.b_mean, dtype=np.float64), (n,))
        sd = np.sqrt(np.broadcast_to(np.asarray(self.b_var, dtype=np.float64), (n,)))
        return mean + sd * rng.standard_normal(n)

    def draw_eta(self, n: int, rng: np.random.Generator) -> np.ndarray:
        self._require_proper()
        mean = np.broadcast_to(np.asarray(self.eta_mean, dtype=np.float64), (n,))
        sd = np.sqrt(np.broadcast_to(np.asarray(self.eta_var, dtype=np.float64), (n,)))
        return mean + sd * rng.standard_normal(n)

    def draw_aux(self, rng: np.random.Generator) -> float:
        self._require_proper()
        return float(self.aux_scale / rng.gamma(self.aux_shape))

    def draw_params(self, n_b: int, n_eta: int, model: TimingModel, rng) -> ModelParams:
        aux = self.draw_aux(rng) if model.has_aux else None
        return ModelParams(self.draw_b(n_b, rng), self.draw_eta(n_eta, rng), aux)
