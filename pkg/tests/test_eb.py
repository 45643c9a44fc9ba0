import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cganeb._validation import InvalidParameterError
from cganeb.eb import EbMethod, cgan_eb, cgan_eb_values, nb_eb, nb_eb_values

means = st.floats(1e-3, 200.0)
alphas = st.floats(0.0, 5.0)
counts = st.integers(0, 500)


def test_nb_eb_examples():
    est = nb_eb(2.0, 0.5, 4)
    assert est.method is EbMethod.NB_EB
    assert est.weight == 0.5 and est.value == 3.0
    assert nb_eb(2.0, 0.0, 17).value == 2.0
    assert nb_eb(2.0, 0.0, 17).weight == 1.0
    assert nb_eb(2.0, 0.5, 2).value == 2.0


def test_cgan_eb_examples():
    est = cgan_eb(3.0, 0.0, 7)
    assert est.weight == 1.0 and est.value == 3.0
    est = cgan_eb(2.0, 2.0, 4)
    assert est.method is EbMethod.CGAN_EB
    assert est.weight == 0.5 and est.value == 3.0
    assert cgan_eb(2.0, 2.0, 2).value == 2.0


@pytest.mark.parametrize("mean", [0.0, -1.0])
def test_cgan_eb_rejects_non_positive_prior(mean):
    with pytest.raises(InvalidParameterError):
        cgan_eb(mean, 1.0, 3)


def test_nb_eb_rejects_bad_inputs():
    with pytest.raises(InvalidParameterError):
        nb_eb(0.0, 0.5, 1)
    with pytest.raises(InvalidParameterError):
        nb_eb(1.0, -0.1, 1)


@given(means, alphas, counts)
@settings(max_examples=300)
def test_nb_eb_bounds(mu, alpha, y):
    est = nb_eb(mu, alpha, y)
    assert 0 < est.weight <= 1
    lo, hi = min(mu, y), max(mu, y)
    assert lo - 1e-12 * hi <= est.value <= hi + 1e-12 * hi


@given(means, st.floats(0.0, 1e4), counts)
@settings(max_examples=300)
def test_cgan_eb_bounds(mean, var, y):
    est = cgan_eb(mean, var, y)
    assert 0 < est.weight <= 1
    lo, hi = min(mean, y), max(mean, y)
    assert lo - 1e-12 * hi <= est.value <= hi + 1e-12 * hi


@given(means, alphas, counts)
@settings(max_examples=300)
def test_cgan_with_gamma_moments_reproduces_nb(mu, alpha, y):
    a = nb_eb(mu, alpha, y).value
    b = cgan_eb(mu, alpha * mu * mu, y).value
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@given(means, alphas, counts)
@settings(max_examples=200)
def test_monotone_in_observed(mu, alpha, y):
    assert nb_eb(mu, alpha, y + 1).value >= nb_eb(mu, alpha, y).value
    assert cgan_eb(mu, alpha * mu, y + 1).value >= cgan_eb(mu, alpha * mu, y).value


def test_vectorised_matches_scalar(rng):
    mu = rng.uniform(0.1, 20, 50)
    y = rng.integers(0, 40, 50)
    var = rng.uniform(0, 30, 50)
    np.testing.assert_allclose(nb_eb_values(mu, 0.7, y), [nb_eb(m, 0.7, k).value for m, k in zip(mu, y)], rtol=1e-15)
    np.testing.assert_allclose(
        cgan_eb_values(mu, var, y), [cgan_eb(m, v, k).value for m, v, k in zip(mu, var, y)], rtol=1e-15
    )


def test_prior_mean_floor_for_all_zero_samples():
    values = cgan_eb_values(np.array([0.0, 2.0]), np.array([0.0, 2.0]), np.array([5, 4]))
    assert values[0] == pytest.approx(1e-6)
    assert values[1] == 3.0
