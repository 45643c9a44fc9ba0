"""Synthetic crash data from a Poisson-gamma process.

Each site gets four uniform covariates, a mean-one gamma heterogeneity
multiplier with variance ``alpha`` and a Poisson count around the resulting
mean.  Two mean functions are available: the log-linear form the NB model is
specified for, and a log-nonlinear form it is not.

Random streams
--------------
A dataset seed is expanded into independent per-block generators::

    SeedSequence(entropy=seed, spawn_key=(block,)) -> PCG64

with ``block = site_index // BLOCK_SIZE``.  Inside a block the draws happen
in a fixed order: all features (row-major), then all gamma multipliers, then
all Poisson counts.  Blocks can therefore be generated in any order or in
parallel and the dataset is still bit-identical.
"""

import enum
from dataclasses import dataclass

import numpy as np

from ._validation import InvalidParameterError, check_positive, check_positive_int

N_FEATURES = 4
BLOCK_SIZE = 4096


class FunctionalForm(str, enum.Enum):
    LOG_LINEAR = "LogLinear"
    LOG_NONLINEAR = "LogNonlinear"


@dataclass(frozen=True)
class SimConfig:
    dispersion_alpha: float
    intercept_beta0: float
    functional_form: FunctionalForm = FunctionalForm.LOG_LINEAR
    n_sites: int = 2000
    seed: int = 0

    def __post_init__(self):
        check_positive(self.dispersion_alpha, "dispersion_alpha")
        check_positive_int(self.n_sites, "n_sites")
        if not np.isfinite(self.intercept_beta0):
            raise InvalidParameterError("intercept_beta0 must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "functional_form", FunctionalForm(self.functional_form))


@dataclass(frozen=True)
class Site:
    features: tuple
    true_lambda: float
    observed_count: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Simulated sites stored column-wise.

    ``X`` is ``(n_sites, 4)``, ``true_lambda`` and ``y`` have length
    ``n_sites``.  ``sites`` gives the record view.
    """

    config: SimConfig
    X: np.ndarray
    true_lambda: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        n = self.config.n_sites
        if self.X.shape != (n, N_FEATURES) or self.true_lambda.shape != (n,) or self.y.shape != (n,):
            raise ValueError("dataset arrays do not match config.n_sites")

    def __len__(self):
        return self.config.n_sites

    @property
    def sites(self):
        return [
            Site(tuple(float(v) for v in x), float(lam), int(k))
            for x, lam, k in zip(self.X, self.true_lambda, self.y)
        ]

    def equals(self, other):
        return (
            self.config == other.config
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.true_lambda, other.true_lambda)
            and np.array_equal(self.y, other.y)
        )


def block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def sample_uniform_features(rng):
    """Four independent U[0, 1) covariates."""
    return np.asarray(rng.random(N_FEATURES), dtype=np.float64)


def covariate_index(X, form=FunctionalForm.LOG_LINEAR):
    """Covariate part of ``log(lambda)`` (no intercept, no heterogeneity)."""
    X = np.asarray(X, dtype=np.float64)
    x1, x2, x3, x4 = (X[..., j] for j in range(N_FEATURES))
    form = FunctionalForm(form)
    if form is FunctionalForm.LOG_LINEAR:
        return 0.05 * x1 - 0.05 * x2 + x3 - x4
    return 0.05 * np.sqrt(x1) - 0.05 * np.sqrt(x2) + x3**2 - x1 * x4


def mean_function(features, beta0, epsilon=0.0, form=FunctionalForm.LOG_LINEAR):
    """Poisson mean ``exp(beta0 + eta(X) + epsilon)``.

    Accepts a single 4-vector (returns a float) or an ``(n, 4)`` array.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.shape[-1] != N_FEATURES:
        raise ValueError(f"features must have {N_FEATURES} columns")
    lam = np.exp(beta0 + covariate_index(X, form) + epsilon)
    return float(lam) if X.ndim == 1 else lam


def sample_heterogeneity(alpha, rng, size=None):
    """Draw ``exp(epsilon)`` from a gamma law with mean 1 and variance ``alpha``."""
    alpha = check_positive(alpha, "alpha")
    return rng.gamma(shape=1.0 / alpha, scale=alpha, size=size)


def sample_counts(lam, rng):
    """Poisson counts around ``lam``.

    numpy's exact sampler: multiplication (inversion) for means below 10,
    transformed rejection (PTRS) above.
    """
    return rng.poisson(lam)


def _simulate_block(config, block):
    start = block * BLOCK_SIZE
    m = min(BLOCK_SIZE, config.n_sites - start)
    rng = block_rng(config.seed, block)
    X = rng.random((m, N_FEATURES))
    g = sample_heterogeneity(config.dispersion_alpha, rng, size=m)
    lam = np.exp(config.intercept_beta0 + covariate_index(X, config.functional_form)) * g
    y = sample_counts(lam, rng)
    return X, lam, y


def simulate_dataset(config):
    """Generate ``config.n_sites`` sites following the Poisson-gamma recipe."""
    if not isinstance(config, SimConfig):
        raise TypeError("config must be a SimConfig")
    n_blocks = -(-config.n_sites // BLOCK_SIZE)
    parts = [_simulate_block(config, b) for b in range(n_blocks)]
    X = np.concatenate([p[0] for p in parts])
    lam = np.concatenate([p[1] for p in parts])
    y = np.concatenate([p[2] for p in parts]).astype(np.int64)
    return Dataset(config=config, X=X, true_lambda=lam, y=y)


def analytic_mean(beta0, form=FunctionalForm.LOG_LINEAR):
    """Population mean of ``Y`` for the log-linear form.

    Uniform covariates are independent, so ``E[exp(a X)] = (e^a - 1)/a`` per
    term and the gamma multiplier has mean one.
    """
    if FunctionalForm(form) is not FunctionalForm.LOG_LINEAR:
        raise NotImplementedError("closed form only available for the log-linear mean")
    slopes = np.array([0.05, -0.05, 1.0, -1.0])
    return float(np.exp(beta0) * np.prod(np.expm1(slopes) / slopes))
