"""Negative binomial safety performance function.

Coefficients come from a Poisson log-link GLM fitted by IRLS; the NB2
dispersion is then estimated by an auxiliary no-constant OLS regression of
``((y - mu)^2 - y) / mu`` on ``mu``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    InvalidParameterError,
    RankDeficiencyError,
    check_counts,
    check_features,
    check_positive,
    check_positive_int,
)


@dataclass(frozen=True)
class NbFit:
    coefficients: np.ndarray
    dispersion_alpha_hat: float | None = None
    converged: bool = False
    iterations: int = 0
    log_likelihood: float = float("nan")
    log_likelihood_path: tuple = field(default=(), repr=False)

    @property
    def intercept(self):
        return float(self.coefficients[0])

    @property
    def slopes(self):
        return self.coefficients[1:]


def _design(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def poisson_loglik(y, eta):
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def _unpack(data, y):
    if y is None:
        return check_features(data.X), check_counts(data.y)
    X = check_features(data)
    return X, check_counts(y, n_samples=X.shape[0])


def fit_poisson_glm(data, y=None, tol=1e-8, max_iter=100):
    """Poisson log-link regression by iteratively reweighted least squares.

    ``data`` is either a :class:`~cganeb.simulate.Dataset` (with ``y``
    omitted) or a feature matrix.  Starts from the intercept-only solution
    ``ln(mean(y))`` and halves any step that lowers the log-likelihood.
    Non-convergence is reported through ``converged=False``.
    """
    tol = check_positive(tol, "tol")
    max_iter = check_positive_int(max_iter, "max_iter")
    X, y = _unpack(data, y)
    A = _design(X)
    n, p = A.shape
    if n <= p:
        raise InvalidParameterError(f"need more sites ({n}) than coefficients ({p})")
    if np.linalg.matrix_rank(A) < p:
        raise RankDeficiencyError("design matrix (with intercept) is rank deficient")

    beta = np.zeros(p)
    beta[0] = np.log(max(y.mean(), 1e-10))
    eta = A @ beta
    ll = poisson_loglik(y, eta)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        AtW = A.T * mu
        try:
            chol = np.linalg.cholesky(AtW @ A)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError("weighted normal equations are singular") from exc
        target = np.linalg.solve(chol.T, np.linalg.solve(chol, AtW @ z))
        step = target - beta
        # Newton on a concave objective; halving only guards against overshoot
        for _ in range(30):
            new_eta = A @ (beta + step)
            new_ll = poisson_loglik(y, new_eta)
            if new_ll >= ll - 1e-10 * max(1.0, abs(ll)):
                break
            step = step / 2
        beta = beta + step
        eta = new_eta
        ll = new_ll
        path.append(new_ll)
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    return NbFit(
        coefficients=beta,
        converged=converged,
        iterations=it,
        log_likelihood=poisson_loglik(y, eta),
        log_likelihood_path=tuple(path),
    )


def estimate_dispersion_aux_ols(data, fitted_mu, y=None):
    """Auxiliary OLS (no constant) estimate of the NB2 dispersion.

    Regresses ``z_i = ((y_i - mu_i)^2 - y_i) / mu_i`` on ``mu_i``; the slope
    ``sum(z mu) / sum(mu^2)`` is the estimate, clamped at zero.
    """
    counts = check_counts(data.y if y is None else y)
    mu = np.asarray(fitted_mu, dtype=np.float64).ravel()
    if mu.shape != counts.shape:
        raise ValueError("fitted_mu and counts differ in length")
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise InvalidParameterError("fitted means must be strictly positive")
    z = ((counts - mu) ** 2 - counts) / mu
    alpha = float(np.dot(z, mu) / np.dot(mu, mu))
    return max(alpha, 0.0)


def predict_mu(fit, features):
    """``exp(b0 + X @ b)`` for one site (float) or many (array)."""
    coef = np.asarray(fit.coefficients if isinstance(fit, NbFit) else fit, dtype=np.float64)
    X = np.asarray(features, dtype=np.float64)
    mu = np.exp(coef[0] + X @ coef[1:])
    return float(mu) if X.ndim == 1 else mu


def fit_nb(data, y=None, tol=1e-8, max_iter=100):
    """Two-stage NB fit: Poisson IRLS for the coefficients, then auxiliary OLS for alpha."""
    X, counts = _unpack(data, y)
    fit = fit_poisson_glm(X, counts, tol=tol, max_iter=max_iter)
    alpha = estimate_dispersion_aux_ols(None, predict_mu(fit, X), y=counts)
    return replace(fit, dispersion_alpha_hat=alpha)


def nb_logpmf(y, mu, alpha):
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0):
        raise InvalidParameterError("alpha must be > 0; use the Poisson pmf for alpha = 0")
    if np.any(mu <= 0):
        raise InvalidParameterError("mu must be > 0")
    r = 1.0 / alpha
    am = alpha * mu
    return (
        gammaln(y + r)
        - gammaln(r)
        - gammaln(y + 1.0)
        + y * (np.log(am) - np.log1p(am))
        - r * np.log1p(am)
    )


def nb_pmf(y, mu, alpha):
    """NB2 probability mass with mean ``mu`` and variance ``mu + alpha mu^2``."""
    out = np.exp(nb_logpmf(y, mu, alpha))
    return float(out) if out.ndim == 0 else out


class NegativeBinomialSPF(RegressorMixin, BaseEstimator):
    """Negative binomial crash prediction model with a scikit-learn interface.

    Parameters
    ----------
    tol : float
        IRLS stops once the largest coefficient change is below ``tol``.
    max_iter : int
        IRLS iteration cap.

    Attributes
    ----------
    fit_ : NbFit
    intercept_, coef_ : log-scale coefficients
    alpha_ : float
        Auxiliary-OLS dispersion estimate (clamped at zero).
    """

    def __init__(self, tol=1e-8, max_iter=100):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X = check_features(X)
        y = check_counts(y, n_samples=X.shape[0])
        self.fit_ = fit_nb(X, y, tol=self.tol, max_iter=self.max_iter)
        self.intercept_ = self.fit_.intercept
        self.coef_ = self.fit_.slopes.copy()
        self.alpha_ = self.fit_.dispersion_alpha_hat
        self.n_iter_ = self.fit_.iterations
        self.converged_ = self.fit_.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_features(X, n_features=self.n_features_in_)
        return predict_mu(self.fit_, X)

    def predictive_moments(self, X):
        """Mean ``mu`` and gamma-prior variance ``alpha mu^2`` of the site mean."""
        mu = self.predict(X)
        return mu, self.alpha_ * mu**2
