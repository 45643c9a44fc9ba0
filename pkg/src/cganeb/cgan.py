"""Conditional GAN used as a non-parametric crash prediction model.

The generator maps ``(X, z)`` with scalar ``z ~ N(0, 1)`` to a non-negative
crash count; the discriminator scores ``(X, y)`` pairs as real or generated.
Counts are divided by ``y_scale`` (the training-set mean count by default)
before entering either network and generated samples are multiplied back on
the way out.  Dividing by the maximum instead leaves typical targets near 0.1,
where early Adam swings of the generator push every sample below the ReLU
kink and training never recovers.
"""

import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    InvalidParameterError,
    TrainingDivergenceError,
    check_counts,
    check_features,
    check_positive,
    check_positive_int,
)
from .nn import (
    Activation,
    AdamState,
    adam_step,
    bce_grad,
    bce_loss,
    build_network,
    load_network,
    read_manifest,
    save_network,
    write_manifest,
)

logger = logging.getLogger(__name__)

ELU, RELU, SIGMOID = Activation.ELU, Activation.RELU, Activation.SIGMOID
DEFAULT_M_SAMPLES = 500
# rows per generator forward pass when sampling many sites at once
SAMPLE_CHUNK = 50_000


Y_SCALINGS = {"max": np.max, "mean": np.mean, "none": None}


def target_scale(y, how="mean"):
    """Divisor applied to counts before they enter the networks (1 if degenerate)."""
    reducer = Y_SCALINGS[how]
    scale = float(reducer(y)) if reducer is not None else 1.0
    return scale if scale > 0 else 1.0


@dataclass(frozen=True)
class CganConfig:
    epochs: int = 500
    batch_size: int = 100
    gen_lr: float = 0.001
    disc_lr: float = 0.001
    gen_decay: float = 0.001
    disc_decay: float = 0.0
    noise_dim: int = 1
    seed: int = 0
    relu_surrogate_slope: float = 0.01
    y_scaling: str = "mean"

    def __post_init__(self):
        check_positive_int(self.epochs, "epochs", allow_zero=True)
        check_positive_int(self.batch_size, "batch_size")
        check_positive(self.gen_lr, "gen_lr")
        check_positive(self.disc_lr, "disc_lr")
        check_positive(self.gen_decay, "gen_decay", allow_zero=True)
        check_positive(self.disc_decay, "disc_decay", allow_zero=True)
        check_positive_int(self.noise_dim, "noise_dim")
        check_positive(self.relu_surrogate_slope, "relu_surrogate_slope", allow_zero=True)
        if self.y_scaling not in Y_SCALINGS:
            raise InvalidParameterError(f"y_scaling must be one of {sorted(Y_SCALINGS)}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")

    def to_dict(self):
        return asdict(self)


def build_generator(n_features, noise_dim, rng):
    return build_network(
        [[(n_features, 100, ELU)], [(noise_dim, 100, ELU)]],
        [(200, 40, ELU), (40, 40, ELU), (40, 40, ELU), (40, 1, RELU)],
        rng,
    )


def build_discriminator(n_features, rng):
    return build_network(
        [[(n_features, 100, ELU)], [(1, 100, ELU)]],
        [(200, 40, ELU), (40, 40, ELU), (40, 1, SIGMOID)],
        rng,
    )


@dataclass(eq=False)
class CganModel:
    generator: object
    discriminator: object
    y_scale: float
    config: CganConfig
    n_features: int
    loss_history: list = field(default_factory=list)

    def to_internal(self, y):
        return np.asarray(y, dtype=np.float64) / self.y_scale

    def from_internal(self, y_scaled):
        return np.asarray(y_scaled, dtype=np.float64) * self.y_scale

    def save(self, directory):
        manifest = {
            "format": "cganeb-cgan/1",
            "generator": save_network(self.generator, directory, "generator"),
            "discriminator": save_network(self.discriminator, directory, "discriminator"),
            "y_scale": self.y_scale,
            "n_features": self.n_features,
            "config": self.config.to_dict(),
            "loss_history": [list(pair) for pair in self.loss_history],
        }
        write_manifest(directory, manifest)
        return os.path.join(directory, "manifest.json")

    @classmethod
    def load(cls, directory):
        manifest = read_manifest(directory)
        return cls(
            generator=load_network(directory, manifest["generator"]),
            discriminator=load_network(directory, manifest["discriminator"]),
            y_scale=float(manifest["y_scale"]),
            config=CganConfig(**manifest["config"]),
            n_features=int(manifest["n_features"]),
            loss_history=[tuple(p) for p in manifest["loss_history"]],
        )


def _rngs(seed):
    init_seq, train_seq = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(train_seq)


def init_model(n_features, y_scale, config):
    init_rng, _ = _rngs(config.seed)
    return CganModel(
        generator=build_generator(n_features, config.noise_dim, init_rng),
        discriminator=build_discriminator(n_features, init_rng),
        y_scale=float(y_scale),
        config=config,
        n_features=n_features,
    )


def train(data, config=None, y=None):
    """Adversarial training of a fresh CGAN.

    ``data`` is a :class:`~cganeb.simulate.Dataset` or, with ``y`` given, a
    feature matrix.  Targets need only be finite and non-negative.  Each epoch shuffles the sites and walks through
    mini-batches (the last one may be short).  Per batch the discriminator
    takes one Adam step on ``BCE(D(X, y), 1) + BCE(D(X, G(X, z)), 0)``, then
    the generator takes one step on ``BCE(D(X, G(X, z)), 1)``.

    The generator's ReLU head back-propagates with slope
    ``config.relu_surrogate_slope`` on inactive inputs, restricted to the
    direction that re-activates them, so a generator whose outputs have all
    hit zero can still recover but is never pushed deeper into the dead
    region.  Its forward pass (and hence every sample) stays non-negative.
    """
    config = config or CganConfig()
    if y is None:
        X, y = check_features(data.X), check_counts(data.y, integer=False)
    else:
        X = check_features(data)
        y = check_counts(y, n_samples=X.shape[0], integer=False)
    n, d = X.shape
    if n == 0:
        raise InvalidParameterError("cannot train on an empty dataset")
    if np.any((X < 0) | (X > 1)):
        raise InvalidParameterError("features must lie in [0, 1]")

    model = init_model(d, target_scale(y, config.y_scaling), config)
    if config.epochs == 0:
        return model
    _, rng = _rngs(config.seed)
    G, D = model.generator, model.discriminator
    g_opt = AdamState(base_lr=config.gen_lr, decay=config.gen_decay)
    d_opt = AdamState(base_lr=config.disc_lr, decay=config.disc_decay)
    y_scaled = model.to_internal(y).reshape(-1, 1)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        real_sum = fake_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = X[idx], y_scaled[idx]
            b = len(idx)
            ones, zeros = np.ones((b, 1)), np.zeros((b, 1))
            z = rng.standard_normal((b, config.noise_dim))

            fake, g_tape = G.forward([xb, z])
            d_real, real_tape = D.forward([xb, yb])
            d_fake, fake_tape = D.forward([xb, fake])
            real_loss = bce_loss(d_real, ones)
            fake_loss = bce_loss(d_fake, zeros)
            if not np.isfinite(real_loss + fake_loss):
                raise TrainingDivergenceError(f"non-finite discriminator loss at epoch {epoch}", epoch)
            grads_real, _ = D.backward(real_tape, bce_grad(d_real, ones))
            grads_fake, _ = D.backward(fake_tape, bce_grad(d_fake, zeros))
            try:
                adam_step(d_opt, D, [a + c for a, c in zip(grads_real, grads_fake)])
                d_gen, gen_tape = D.forward([xb, fake])
                _, input_grads = D.backward(gen_tape, bce_grad(d_gen, ones))
                g_grads, _ = G.backward(g_tape, input_grads[1], config.relu_surrogate_slope)
                adam_step(g_opt, G, g_grads)
            except TrainingDivergenceError as exc:
                raise TrainingDivergenceError(f"{exc} at epoch {epoch}", epoch) from exc

            real_sum += real_loss
            fake_sum += fake_loss
            n_batches += 1
        model.loss_history.append((real_sum / n_batches, fake_sum / n_batches))
        if (epoch + 1) % 100 == 0:
            logger.debug("epoch %d real=%.4f fake=%.4f", epoch + 1, *model.loss_history[-1])
    return model


def _check_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_many(model, X, m, rng):
    """``(n_sites, m)`` array of rescaled generator samples."""
    m = check_positive_int(m, "m")
    X = check_features(X, n_features=model.n_features)
    rng = _check_rng(rng)
    n = X.shape[0]
    z = rng.standard_normal((n * m, model.config.noise_dim))
    rows = np.repeat(X, m, axis=0)
    out = np.empty(n * m)
    for start in range(0, n * m, SAMPLE_CHUNK):
        stop = start + SAMPLE_CHUNK
        out[start:stop] = model.generator.predict([rows[start:stop], z[start:stop]])[:, 0]
    return model.from_internal(out).reshape(n, m)


def sample(model, features, m=DEFAULT_M_SAMPLES, rng=None):
    """``m`` generated crash counts (continuous, non-negative) for one site."""
    return sample_many(model, np.asarray(features, dtype=np.float64).reshape(1, -1), m, rng)[0]


def sample_moments(samples, axis=-1):
    """Sample mean and unbiased (``m - 1``) variance along ``axis``."""
    samples = np.asarray(samples, dtype=np.float64)
    m = samples.shape[axis]
    if m < 2:
        raise InvalidParameterError("need at least two samples for a variance")
    mean = samples.mean(axis=axis)
    dev = samples - np.expand_dims(mean, axis)
    var = np.sum(dev * dev, axis=axis) / (m - 1)
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def predictive_moments(model, features, m=DEFAULT_M_SAMPLES, rng=None):
    """Mean and variance of ``m`` generator samples for one site."""
    if m < 2:
        raise InvalidParameterError("need m >= 2 for a variance")
    return sample_moments(sample(model, features, m, rng))


def predictive_moments_many(model, X, m=DEFAULT_M_SAMPLES, rng=None):
    if m < 2:
        raise InvalidParameterError("need m >= 2 for a variance")
    return sample_moments(sample_many(model, X, m, rng), axis=1)


class CGANRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`train` and the sampling helpers.

    ``predict`` returns the Monte-Carlo mean of ``n_samples`` generator
    draws per row; ``predictive_moments`` returns mean and variance.
    """

    def __init__(
        self,
        epochs=500,
        batch_size=100,
        gen_lr=0.001,
        disc_lr=0.001,
        gen_decay=0.001,
        disc_decay=0.0,
        noise_dim=1,
        n_samples=DEFAULT_M_SAMPLES,
        random_state=0,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.gen_lr = gen_lr
        self.disc_lr = disc_lr
        self.gen_decay = gen_decay
        self.disc_decay = disc_decay
        self.noise_dim = noise_dim
        self.n_samples = n_samples
        self.random_state = random_state

    def _config(self):
        return CganConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            gen_lr=self.gen_lr,
            disc_lr=self.disc_lr,
            gen_decay=self.gen_decay,
            disc_decay=self.disc_decay,
            noise_dim=self.noise_dim,
            seed=int(self.random_state or 0),
        )

    def fit(self, X, y):
        X = check_features(X)
        self.model_ = train(X, self._config(), y=y)
        self.n_features_in_ = X.shape[1]
        self.loss_history_ = list(self.model_.loss_history)
        return self

    def sample(self, X, m=None, random_state=None):
        check_is_fitted(self, "model_")
        rng = random_state if random_state is not None else self.random_state
        return sample_many(self.model_, X, m or self.n_samples, rng)

    def predictive_moments(self, X, random_state=None):
        return sample_moments(self.sample(X, random_state=random_state), axis=1)

    def predict(self, X):
        return self.sample(X).mean(axis=1)
