"""Empirical Bayes estimates of expected crash frequency.

Both estimators shrink a site's observed count toward a model prediction,

    EB = w * prior_mean + (1 - w) * y,    w = prior_mean / (prior_mean + prior_variance)

For the NB model the gamma prior has variance ``alpha * mu**2`` so that
``w = 1 / (1 + alpha * mu)``; for the CGAN the prior moments are the sample
mean and variance of generated counts.
"""

import enum
from dataclasses import dataclass

import numpy as np

from ._validation import InvalidParameterError

PRIOR_MEAN_FLOOR = 1e-6


class EbMethod(str, enum.Enum):
    NB_EB = "NB-EB"
    CGAN_EB = "CGAN-EB"


@dataclass(frozen=True)
class EbEstimate:
    method: EbMethod
    prior_mean: float
    prior_variance: float
    weight: float
    observed: int
    value: float


def _check_scalar_inputs(mean, var, y):
    if not np.isfinite(mean) or not np.isfinite(var):
        raise InvalidParameterError("prior moments must be finite")
    if var < 0:
        raise InvalidParameterError("prior variance must be >= 0")
    if y < 0:
        raise InvalidParameterError("observed count must be >= 0")


def nb_eb(mu, alpha, y):
    if not mu > 0:
        raise InvalidParameterError(f"mu must be > 0, got {mu!r}")
    if not alpha >= 0:
        raise InvalidParameterError(f"alpha must be >= 0, got {alpha!r}")
    _check_scalar_inputs(mu, alpha, y)
    w = 1.0 / (1.0 + alpha * mu)
    return EbEstimate(EbMethod.NB_EB, float(mu), float(alpha * mu * mu), w, int(y), w * mu + (1.0 - w) * y)


def cgan_eb(prior_mean, prior_variance, y):
    if not prior_mean > 0:
        raise InvalidParameterError(f"prior mean must be > 0, got {prior_mean!r}")
    _check_scalar_inputs(prior_mean, prior_variance, y)
    w = prior_mean / (prior_mean + prior_variance)
    value = w * prior_mean + (1.0 - w) * y
    return EbEstimate(EbMethod.CGAN_EB, float(prior_mean), float(prior_variance), w, int(y), value)


def nb_eb_values(mu, alpha, y):
    """Vectorised NB-EB estimates for many sites sharing one ``alpha``."""
    mu = np.asarray(mu, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(mu <= 0) or alpha < 0:
        raise InvalidParameterError("need mu > 0 and alpha >= 0")
    w = 1.0 / (1.0 + alpha * mu)
    return w * mu + (1.0 - w) * y


def cgan_eb_values(prior_mean, prior_variance, y, floor=PRIOR_MEAN_FLOOR):
    """Vectorised CGAN-EB estimates.

    Prior means below ``floor`` (a generator emitting only zeros for a site)
    are raised to ``floor`` so the weight stays defined.
    """
    mean = np.maximum(np.asarray(prior_mean, dtype=np.float64), floor)
    var = np.asarray(prior_variance, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(var < 0):
        raise InvalidParameterError("prior variance must be >= 0")
    w = mean / (mean + var)
    return w * mean + (1.0 - w) * y
