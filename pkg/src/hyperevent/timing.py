"""Waiting-time distribution families with a shared mean parameterization.

Four families are supported: exponential, log-normal, Weibull, and gamma.
A family is selected together with a link function mapping the linear
predictor to its location:

* log-normal uses the identity link on the location of log(tau), with a
  separate variance parameter (``aux``);
* exponential, Weibull, and gamma default to the log link on the
  distribution mean, so any real linear predictor yields a positive mean;
  Weibull and gamma carry their shape in ``aux`` and choose the scale so
  that the mean equals the linked predictor.

Densities and survival functions are evaluated in log space throughout;
survival uses complementary functions so it never degrades to log(1 - cdf)
near 1. Sampling is inverse-CDF so each draw consumes exactly one uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, DataValidationError

FAMILIES = ("exponential", "lognormal", "weibull", "gamma")
LINKS = ("identity", "log", "inverse")
DEFAULT_LINKS = {
    "exponential": "log",
    "lognormal": "identity",
    "weibull": "log",
    "gamma": "log",
}

_LOG_2PI = math.log(2.0 * math.pi)
_TINY_UNIFORM = 1e-300


@dataclass(frozen=True)
class TimingModel:
    """Family + link + auxiliary shape/variance parameter.

    ``aux`` is required for every family except the exponential: the
    log-normal variance of log(tau), the Weibull shape, or the gamma shape.
    """

    family: str
    link: str | None = None
    aux: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown timing family {self.family!r}; choose from {FAMILIES}")
        link = self.link if self.link is not None else DEFAULT_LINKS[self.family]
        if link not in LINKS:
            raise ConfigError(f"unknown link {link!r}; choose from {LINKS}")
        object.__setattr__(self, "link", link)
        if self.family == "exponential":
            if self.aux is not None:
                raise ConfigError("the exponential family takes no auxiliary parameter")
        else:
            if self.aux is None:
                raise ConfigError(f"family {self.family!r} requires an auxiliary parameter")
            if not self.aux > 0:
                raise ConfigError("the auxiliary parameter must be positive")

    @property
    def has_aux(self) -> bool:
        return self.family != "exponential"

    def with_aux(self, aux: float | None) -> "TimingModel":
        return TimingModel(self.family, self.link, aux)


def apply_link(theta: np.ndarray, link: str) -> np.ndarray:
    """Map the linear predictor through the inverse link."""
    theta = np.asarray(theta, dtype=np.float64)
    if link == "identity":
        return theta
    if link == "log":
        return np.exp(theta)
    if link == "inverse":
        with np.errstate(divide="ignore"):
            return 1.0 / theta
    raise ConfigError(f"unknown link {link!r}")


def mean_param(eta: np.ndarray, y: np.ndarray, model: TimingModel) -> np.ndarray:
    """Per-slot location: inverse link applied to each row's dot product.

    For the log-normal this is the location of log(tau) and may be negative;
    for the other families it is the distribution mean and must be positive
    (guaranteed under the log link).
    """
    eta = np.asarray(eta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != eta.shape[0]:
        raise DataValidationError(
            f"timing feature dimension {y.shape[-1]} does not match coefficient length {eta.shape[0]}"
        )
    return apply_link(y @ eta, model.link)


def _check_tau(tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau <= 0):
        raise DataValidationError("time increments must be positive")
    return tau


def _weibull_scale(mu, k):
    return mu / special.gamma(1.0 + 1.0 / k)


def _log_ndtr(z):
    return special.log_ndtr(z)


def log_pdf(tau, mu, model: TimingModel):
    """Log-density of the waiting time, elementwise over broadcast inputs.

    Returns -inf where the location parameter is invalid for the family
    (possible only under the inverse link), so MH proposals that wander
    into an invalid region are rejected rather than crashing.
    """
    tau = _check_tau(tau)
    mu = np.asarray(mu, dtype=np.float64)
    if model.family == "lognormal":
        var = float(model.aux)
        logt = np.log(tau)
        out = -logt - 0.5 * (_LOG_2PI + math.log(var)) - (logt - mu) ** 2 / (2.0 * var)
        return out if out.ndim else float(out)
    valid = mu > 0
    safe = np.where(valid, mu, 1.0)
    if model.family == "exponential":
        out = -np.log(safe) - tau / safe
    elif model.family == "weibull":
        k = float(model.aux)
        c = _weibull_scale(safe, k)
        logt_c = np.log(tau) - np.log(c)
        out = math.log(k) - np.log(c) + (k - 1.0) * logt_c - np.exp(k * logt_c)
    elif model.family == "gamma":
        a = float(model.aux)
        c = safe / a
        out = (a - 1.0) * np.log(tau) - tau / c - special.gammaln(a) - a * np.log(c)
    else:  # pragma: no cover
        raise ConfigError(model.family)
    out = np.where(valid, out, -np.inf)
    return out if out.ndim else float(out)


def log_survival(tau, mu, model: TimingModel):
    """Log of P(T > tau), elementwise, via complementary functions."""
    tau = _check_tau(tau)
    mu = np.asarray(mu, dtype=np.float64)
    if model.family == "lognormal":
        sigma = math.sqrt(float(model.aux))
        out = _log_ndtr(-(np.log(tau) - mu) / sigma)
        return out if out.ndim else float(out)
    valid = mu > 0
    safe = np.where(valid, mu, 1.0)
    if model.family == "exponential":
        out = -tau / safe
    elif model.family == "weibull":
        k = float(model.aux)
        c = _weibull_scale(safe, k)
        out = -np.exp(k * (np.log(tau) - np.log(c)))
    elif model.family == "gamma":
        a = float(model.aux)
        with np.errstate(divide="ignore"):
            out = np.log(special.gammaincc(a, tau * a / safe))
    else:  # pragma: no cover
        raise ConfigError(model.family)
    out = np.where(valid, out, -np.inf)
    return out if out.ndim else float(out)


def sample_increment(mu, model: TimingModel, rng: np.random.Generator):
    """Inverse-CDF draws with the same parameterization as the densities.

    Broadcasts over ``mu``; one uniform per draw. Uniforms are nudged off
    the endpoints so draws are strictly positive and finite.
    """
    mu = np.asarray(mu, dtype=np.float64)
    v = rng.random(mu.shape if mu.ndim else None)
    v = np.clip(v, _TINY_UNIFORM, 1.0 - 1e-16)
    if model.family == "lognormal":
        sigma = math.sqrt(float(model.aux))
        out = np.exp(mu + sigma * special.ndtri(v))
    elif model.family == "exponential":
        out = -mu * np.log1p(-v)
    elif model.family == "weibull":
        k = float(model.aux)
        out = _weibull_scale(mu, k) * (-np.log1p(-v)) ** (1.0 / k)
    elif model.family == "gamma":
        a = float(model.aux)
        out = (mu / a) * special.gammaincinv(a, v)
    else:  # pragma: no cover
        raise ConfigError(model.family)
    return out if out.ndim else float(out)
