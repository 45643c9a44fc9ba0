"""Experiment grid and the replication protocol.

Each experiment trains ``n_train_sets`` NB/CGAN model pairs on independent
training sets and scores each pair on ``n_test_sets_per_train`` fresh test
sets, giving ``n_train_sets * n_test_sets_per_train`` replications.

Seed derivation
---------------
Every random stream is keyed by::

    sha256(f"{master_seed}/{experiment_id}/{train_idx}/{test_idx}/{phase}")

taking the first 8 bytes little-endian as an unsigned 64-bit seed.  Phases are
``train-data`` and ``cgan-train`` (with ``test_idx = -1``), ``test-data`` and
``cgan-sample``.  A replication's streams therefore depend only on its own
coordinates, so results do not depend on execution order or parallelism.
"""

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cgan import DEFAULT_M_SAMPLES, CganConfig, predictive_moments_many, train
from .eb import EbMethod, cgan_eb_values, nb_eb_values
from .nb_glm import fit_nb, predict_mu
from .screening import (
    CUTOFFS,
    MapeSet,
    ScreeningResult,
    fi_test,
    mape_hotspots,
    paired_t_test,
    pmd_test,
    summarize,
)
from .simulate import FunctionalForm, SimConfig, simulate_dataset

logger = logging.getLogger(__name__)

METHODS = (EbMethod.CGAN_EB.value, EbMethod.NB_EB.value)
METRICS = ("fi", "pmd", "mape")


def subseed(master_seed, experiment_id, train_idx, test_idx, phase):
    key = f"{int(master_seed)}/{experiment_id}/{int(train_idx)}/{int(test_idx)}/{phase}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    alpha: float
    beta0: float
    n_sites: int
    functional_form: FunctionalForm = FunctionalForm.LOG_LINEAR
    n_train_sets: int = 5
    n_test_sets_per_train: int = 5
    cutoffs: tuple = CUTOFFS
    cgan_config: CganConfig = field(default_factory=CganConfig)
    m_samples: int = DEFAULT_M_SAMPLES
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "functional_form", FunctionalForm(self.functional_form))
        object.__setattr__(self, "cutoffs", tuple(float(c) for c in self.cutoffs))
        if isinstance(self.cgan_config, dict):
            object.__setattr__(self, "cgan_config", CganConfig(**self.cgan_config))
        if self.n_train_sets < 1 or self.n_test_sets_per_train < 1:
            raise ValueError("need at least one training and one test set")
        if self.m_samples < 2:
            raise ValueError("m_samples must be >= 2")
        if not all(0 < c < 1 for c in self.cutoffs):
            raise ValueError("cutoffs must be fractions in (0, 1)")

    @property
    def n_replications(self):
        return self.n_train_sets * self.n_test_sets_per_train

    def sim_config(self, seed):
        return SimConfig(self.alpha, self.beta0, self.functional_form, self.n_sites, seed)

    def to_dict(self):
        d = asdict(self)
        d["functional_form"] = self.functional_form.value
        d["cutoffs"] = list(self.cutoffs)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def builtin_grid():
    """E1-E12 (dispersion x mean x sample size) and the log-nonlinear F5-F8."""
    specs = []
    k = 1
    for n in (2000, 1000, 500):
        for alpha in (0.5, 1.5):
            for beta0 in (0.5, 2.5):
                specs.append(ExperimentSpec(f"E{k}", alpha, beta0, n))
                k += 1
    for e in specs[4:8]:
        specs.append(replace(e, id="F" + e.id[1:], functional_form=FunctionalForm.LOG_NONLINEAR))
    return specs


def get_experiment(experiment_id):
    for spec in builtin_grid():
        if spec.id == experiment_id:
            return spec
    raise KeyError(f"unknown experiment {experiment_id!r}")


def load_spec(path):
    """Read an experiment spec from a JSON or TOML file."""
    path = str(path)
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    if "base" in data:
        base = get_experiment(data.pop("base")).to_dict()
        base.update(data)
        data = base
    return ExperimentSpec.from_dict(data)


def dump_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    tests: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def replication_ids(self):
        return sorted({r.replication_id for r in self.rows})

    @property
    def partial(self):
        return len(self.replication_ids) < self.spec.n_replications


def score_replication(spec, train_idx, test_idx, nb_fit, cgan_model, mape_set=MapeSet.PROPOSED):
    """Simulate one test set and evaluate both EB methods at every cutoff."""
    test = simulate_dataset(spec.sim_config(subseed(spec.master_seed, spec.id, train_idx, test_idx, "test-data")))
    nb_values = nb_eb_values(predict_mu(nb_fit, test.X), nb_fit.dispersion_alpha_hat, test.y)
    rng = np.random.default_rng(subseed(spec.master_seed, spec.id, train_idx, test_idx, "cgan-sample"))
    mean, var = predictive_moments_many(cgan_model, test.X, spec.m_samples, rng)
    cgan_values = cgan_eb_values(mean, var, test.y)
    rows = []
    for method, values in ((EbMethod.CGAN_EB.value, cgan_values), (EbMethod.NB_EB.value, nb_values)):
        for c in spec.cutoffs:
            rows.append(
                ScreeningResult(
                    experiment_id=spec.id,
                    replication_id=(train_idx, test_idx),
                    method=method,
                    cutoff_fraction=c,
                    fi=fi_test(test.true_lambda, values, c),
                    pmd=pmd_test(test.true_lambda, values, c),
                    mape=mape_hotspots(test.true_lambda, values, values, c, over=mape_set),
                )
            )
    return rows


def run_train_set(spec, train_idx, mape_set=MapeSet.PROPOSED):
    """Fit both models on one training set and score them on its test sets.

    Returns ``(rows, failures, timings)``; errors are caught per training set
    and per test set so one failure only drops the affected replications.
    """
    rows, failures, timings = [], [], {}
    t0 = time.perf_counter()
    try:
        data = simulate_dataset(spec.sim_config(subseed(spec.master_seed, spec.id, train_idx, -1, "train-data")))
        nb_fit = fit_nb(data)
        config = replace(spec.cgan_config, seed=subseed(spec.master_seed, spec.id, train_idx, -1, "cgan-train"))
        t1 = time.perf_counter()
        model = train(data, config)
        timings[f"train{train_idx}/cgan_train_s"] = time.perf_counter() - t1
    except Exception as exc:  # noqa: BLE001 - recorded, replication marked missing
        logger.error("%s train set %d failed: %s", spec.id, train_idx, exc)
        failures.extend((train_idx, j, repr(exc)) for j in range(spec.n_test_sets_per_train))
        return rows, failures, timings
    for test_idx in range(spec.n_test_sets_per_train):
        t1 = time.perf_counter()
        try:
            rows.extend(score_replication(spec, train_idx, test_idx, nb_fit, model, mape_set))
        except Exception as exc:  # noqa: BLE001
            logger.error("%s replication (%d, %d) failed: %s", spec.id, train_idx, test_idx, exc)
            failures.append((train_idx, test_idx, repr(exc)))
        timings[f"train{train_idx}/test{test_idx}/score_s"] = time.perf_counter() - t1
    timings[f"train{train_idx}/total_s"] = time.perf_counter() - t0
    return rows, failures, timings


def _sort_key(row):
    return (row.replication_id, METHODS.index(row.method), row.cutoff_fraction)


def aggregate(report):
    """Fill summaries and paired tests from the replication rows."""
    spec = report.spec
    report.rows.sort(key=_sort_key)
    by_key = {}
    for r in report.rows:
        by_key.setdefault((r.method, r.cutoff_fraction), {})[r.replication_id] = r
    report.summaries = []
    report.tests = []
    for c in spec.cutoffs:
        for method in METHODS:
            reps = by_key.get((method, c), {})
            for metric in METRICS:
                values = [getattr(reps[k], metric) for k in sorted(reps)]
                if len(values) >= 2:
                    s = summarize(values)
                    entry = (s.mean, s.ci_low, s.ci_high, s.n)
                elif values:
                    entry = (values[0], float("nan"), float("nan"), 1)
                else:
                    continue
                report.summaries.append(dict(zip(("method", "cutoff", "metric", "mean", "ci_low", "ci_high", "n"), (method, c, metric, *entry))))
        a_reps = by_key.get((METHODS[0], c), {})
        b_reps = by_key.get((METHODS[1], c), {})
        common = sorted(set(a_reps) & set(b_reps))
        if len(common) < 2:
            continue
        for metric in METRICS:
            res = paired_t_test([getattr(a_reps[k], metric) for k in common], [getattr(b_reps[k], metric) for k in common])
            better = {"a": METHODS[0], "b": METHODS[1], None: ""}[res.better]
            report.tests.append(
                dict(cutoff=c, metric=metric, t_stat=res.t_stat, dof=res.dof, significant=res.significant, better_method=better)
            )
    return report


def run_experiment(spec, parallel=1, mape_set=MapeSet.PROPOSED):
    """Run the full protocol for one experiment; deterministic given ``spec.master_seed``."""
    t0 = time.perf_counter()
    report = ExperimentReport(spec)
    indices = range(spec.n_train_sets)
    if parallel > 1 and spec.n_train_sets > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_train_set, [spec] * len(indices), indices, [mape_set] * len(indices)))
    else:
        results = [run_train_set(spec, i, mape_set) for i in indices]
    for rows, failures, timings in results:
        report.rows.extend(rows)
        report.failures.extend(failures)
        report.timings.update(timings)
    report.failures.sort()
    aggregate(report)
    report.timings["total_s"] = time.perf_counter() - t0
    if report.partial:
        logger.warning(
            "%s: %d of %d replications completed", spec.id, len(report.replication_ids), spec.n_replications
        )
    return report
