"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class InvalidParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class ShapeError(ValueError):
    """Array arguments have incompatible shapes."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """The (weighted) design matrix does not have full column rank."""


class TrainingDivergenceError(FloatingPointError):
    """A loss or gradient became non-finite during optimisation."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidParameterError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidParameterError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_positive_int(value, name, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")
    return int(value)


def check_features(X, n_features=None):
    """Return ``X`` as a finite 2-D float64 array.

    A 1-D input is treated as a single row.  Zero-column designs are allowed
    (intercept-only models).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    X = check_array(X, dtype=np.float64, ensure_min_features=0)
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_counts(y, n_samples=None, integer=True):
    """Return ``y`` as a 1-D float64 array of non-negative counts.

    ``integer=False`` accepts any non-negative real target.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("counts must be finite")
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    if integer and np.any(y != np.round(y)):
        raise ValueError("counts must be integer-valued")
    if n_samples is not None and y.shape[0] != n_samples:
        raise ShapeError(f"expected {n_samples} counts, got {y.shape[0]}")
    return y


def check_same_length(*arrays):
    arrays = [np.asarray(a, dtype=np.float64).ravel() for a in arrays]
    lengths = {a.shape[0] for a in arrays}
    if len(lengths) != 1:
        raise ShapeError(f"length mismatch: {sorted(lengths)}")
    return arrays
