"""Hotspot screening metrics and the replication statistics built on them."""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import InvalidParameterError, ShapeError, check_same_length

CUTOFFS = (0.025, 0.05, 0.075, 0.10)


class MapeSet(str, enum.Enum):
    PROPOSED = "proposed"
    TRUE = "true"


@dataclass(frozen=True)
class ScreeningResult:
    experiment_id: str
    replication_id: tuple
    method: str
    cutoff_fraction: float
    fi: float
    pmd: float
    mape: float


@dataclass(frozen=True)
class SummaryStat:
    mean: float
    ci_low: float
    ci_high: float
    n: int


def rank_sites(scores):
    """Indices sorted by descending score; ties keep ascending site index."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("no scores to rank")
    if np.any(np.isnan(s)):
        raise ValueError("scores contain NaN")
    return np.argsort(-s, kind="stable")


def n_hotspots(n_sites, cutoff_fraction):
    if not 0 < cutoff_fraction < 1:
        raise InvalidParameterError("cutoff_fraction must lie in (0, 1)")
    # guard against 0.1 * 500 = 50.000000000000007 style rounding
    return max(1, math.ceil(round(cutoff_fraction * n_sites, 9)))


def _hotspot_sets(true_lambdas, scores, cutoff_fraction):
    lam, s = check_same_length(true_lambdas, scores)
    r = n_hotspots(lam.size, cutoff_fraction)
    return lam, rank_sites(lam)[:r], rank_sites(s)[:r]


def fi_test(true_lambdas, scores, cutoff_fraction):
    """Share of the true top-R sites missing from the proposed top-R."""
    _, true_top, proposed = _hotspot_sets(true_lambdas, scores, cutoff_fraction)
    missed = np.setdiff1d(true_top, proposed, assume_unique=True)
    return missed.size / true_top.size


def pmd_test(true_lambdas, scores, cutoff_fraction):
    """Relative shortfall of summed true means in the proposed top-R set."""
    lam, true_top, proposed = _hotspot_sets(true_lambdas, scores, cutoff_fraction)
    best = lam[true_top].sum()
    value = (best - lam[proposed].sum()) / best
    assert value >= -1e-12, "true hotspot set must maximise the summed means"
    return float(max(value, 0.0))


def mape_hotspots(true_lambdas, eb_values, scores, cutoff_fraction, over=MapeSet.PROPOSED):
    """Mean ``|EB - lambda| / lambda`` over the top-R sites.

    ``over="proposed"`` uses the method's own top-R by ``scores``;
    ``over="true"`` uses the true top-R by ``lambda``.
    """
    lam, est, s = check_same_length(true_lambdas, eb_values, scores)
    _, true_top, proposed = _hotspot_sets(lam, s, cutoff_fraction)
    sites = proposed if MapeSet(over) is MapeSet.PROPOSED else true_top
    if np.any(lam[sites] <= 0):
        raise InvalidParameterError("true means must be positive on evaluated sites")
    return float(np.mean(np.abs(est[sites] - lam[sites]) / lam[sites]))


def t_critical(dof, level=0.95):
    return float(stats.t.ppf(0.5 + level / 2.0, dof))


def summarize(values, level=0.95):
    """Mean with a two-sided t confidence interval (``n - 1`` degrees of freedom)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if n < 2:
        raise InvalidParameterError("need at least two values for a confidence interval")
    if np.all(v == v[0]):
        return SummaryStat(float(v[0]), float(v[0]), float(v[0]), n)
    mean = float(v.mean())
    half = t_critical(n - 1, level) * float(v.std(ddof=1)) / math.sqrt(n)
    return SummaryStat(mean, mean - half, mean + half, n)


@dataclass(frozen=True)
class PairedTest:
    t_stat: float
    dof: int
    significant: bool
    better: str | None


def paired_t_test(a, b, alpha_level=0.05):
    """Two-sided paired t-test on ``a - b``.

    ``better`` is ``"a"`` or ``"b"`` (whichever has the lower mean) when the
    difference is significant, else ``None``.  Constant non-zero differences
    give ``t = +/-inf`` and count as significant.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError("paired samples differ in length")
    n = a.size
    if n < 2:
        raise InvalidParameterError("need at least two pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        t = mean / (sd / math.sqrt(n))
    significant = abs(t) > t_critical(n - 1, 1.0 - alpha_level)
    better = None
    if significant:
        better = "a" if mean < 0 else "b"
    return PairedTest(t, n - 1, bool(significant), better)
