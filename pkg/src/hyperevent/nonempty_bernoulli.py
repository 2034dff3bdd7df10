"""Multivariate Bernoulli over binary vectors with the empty vector removed.

Each coordinate j carries a real intensity lambda_j; the unnormalized mass
of a binary vector u is exp(sum_j lambda_j u_j), and the all-zero vector is
excluded from the support. The normalizer has the closed form

    Z(lambda) = prod_j (exp(lambda_j) + 1) - 1,

which this module evaluates in log space as S + log(-expm1(-S)) with
S = sum_j softplus(lambda_j), so it stays finite for any finite intensities.

Vectors are stored with a full slot layout: one slot per node, with the
initiator's own slot structurally excluded. All samplers take an explicit
numpy Generator; callers that parallelize use independent child streams.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DataValidationError

__all__ = [
    "intensity",
    "softplus",
    "log_normalizer",
    "log_pmf",
    "sample",
    "sample_rows",
    "gibbs_prob",
]


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x), overflow-safe for any finite x."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def intensity(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear receiver intensities: one dot product per candidate slot.

    Parameters
    ----------
    coef : (P,) coefficient vector.
    x : (..., P) feature rows, one per candidate slot.

    Returns the array of x . coef over the leading axes. The initiator's
    own slot is computed like any other and ignored downstream.
    """
    coef = np.asarray(coef, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != coef.shape[0]:
        raise DataValidationError(
            f"feature dimension {x.shape[-1]} does not match coefficient length {coef.shape[0]}"
        )
    return x @ coef


def _active_mask(n_slots: int, exclude: int | None) -> np.ndarray:
    mask = np.ones(n_slots, dtype=bool)
    if exclude is not None:
        mask[exclude] = False
    return mask


def log_normalizer(lam: np.ndarray, exclude: int | None = None) -> float:
    """Log of the non-empty normalizer for one intensity vector.

    ``exclude`` names the structurally-absent slot (the initiator), if the
    vector is stored in full slot layout.
    """
    lam = np.asarray(lam, dtype=np.float64)
    active = _active_mask(lam.shape[0], exclude)
    if not active.any():
        raise DataValidationError("no active slots: need at least one candidate")
    s = float(softplus(lam[active]).sum())
    return s + np.log(-np.expm1(-s))


def log_pmf(u: np.ndarray, lam: np.ndarray, exclude: int | None = None) -> float:
    """Log-probability of the binary vector u under intensities lam.

    Returns -inf for the (excluded) empty vector.
    """
    u = np.asarray(u)
    lam = np.asarray(lam, dtype=np.float64)
    if u.shape != lam.shape:
        raise DataValidationError("indicator and intensity vectors differ in length")
    active = _active_mask(lam.shape[0], exclude)
    if exclude is not None and u[exclude] != 0:
        raise DataValidationError("excluded slot must carry a 0 indicator")
    total = int(u[active].sum())
    if total == 0:
        return -np.inf
    return float(lam[active] @ u[active]) - log_normalizer(lam, exclude)


def gibbs_prob(lam_j: float | np.ndarray, rest_nonempty: bool | np.ndarray):
    """Conditional probability that one coordinate is 1 given the others.

    When the rest of the vector is empty, the non-empty support forces the
    coordinate to 1; otherwise the conditional is sigmoid(lambda_j).
    """
    out = np.where(rest_nonempty, expit(lam_j), 1.0)
    return float(out) if out.ndim == 0 else out


def sample_rows(lam: np.ndarray, rng: np.random.Generator, active: np.ndarray) -> np.ndarray:
    """Exact samples for a batch of rows, one non-empty vector per row.

    Parameters
    ----------
    lam : (R, A) intensities.
    rng : numpy Generator.
    active : (R, A) or (A,) boolean mask of candidate slots per row.

    Strategy: draw all coordinates as independent Bernoulli(sigmoid(lam));
    rows that came out all-zero are redrawn with a sequential scheme that
    conditions each coordinate on the suffix still being able to produce a
    non-empty vector. The conditional probability at slot j, given an empty
    prefix, is p_j / (1 - exp(-S_j)) with S_j the suffix softplus sum, so
    the redraw is exact and terminates after one pass (no rejection loop).
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=np.float64))
    n_rows, n_slots = lam.shape
    active = np.broadcast_to(np.asarray(active, dtype=bool), lam.shape)
    if not active.any(axis=1).all():
        raise DataValidationError("every row needs at least one candidate slot")
    p = expit(lam)
    u = ((rng.random(lam.shape) < p) & active).astype(np.uint8)
    empty = np.flatnonzero(u.sum(axis=1) == 0)
    if empty.size:
        lam_e = lam[empty]
        act_e = active[empty]
        p_e = expit(lam_e) * act_e
        sp = softplus(lam_e) * act_e
        # suffix sums: S[:, j] = sum over slots k >= j of softplus
        suffix = np.cumsum(sp[:, ::-1], axis=1)[:, ::-1]
        remaining_after = np.cumsum(act_e[:, ::-1], axis=1)[:, ::-1] - act_e
        draws = rng.random(lam_e.shape)
        out = np.zeros_like(lam_e, dtype=np.uint8)
        still_empty = np.ones(empty.size, dtype=bool)
        for j in range(n_slots):
            t_j = -np.expm1(-suffix[:, j])
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(still_empty, np.minimum(p_e[:, j] / t_j, 1.0), p_e[:, j])
            # an empty prefix with no active slots after j forces a 1 here
            q = np.where(still_empty & (remaining_after[:, j] == 0), 1.0, q)
            hit = act_e[:, j] & (draws[:, j] < q)
            out[:, j] = hit
            still_empty &= ~hit
        u[empty] = out
    return u


def sample(lam: np.ndarray, rng: np.random.Generator, exclude: int | None = None) -> np.ndarray:
    """One exact non-empty draw in full slot layout."""
    lam = np.asarray(lam, dtype=np.float64)
    return sample_rows(lam[None, :], rng, _active_mask(lam.shape[0], exclude))[0]
