"""NB-EB versus CGAN-EB crash hotspot screening on simulated data."""

from ._validation import InvalidParameterError, RankDeficiencyError, ShapeError, TrainingDivergenceError
from .cgan import CganConfig, CganModel, CGANRegressor, predictive_moments, sample, train
from .eb import EbEstimate, EbMethod, cgan_eb, nb_eb
from .harness import ExperimentReport, ExperimentSpec, builtin_grid, get_experiment, load_spec, run_experiment
from .nb_glm import NbFit, NegativeBinomialSPF, estimate_dispersion_aux_ols, fit_nb, fit_poisson_glm, nb_pmf
from .report import emit_histogram, emit_report
from .screening import CUTOFFS, MapeSet, ScreeningResult, SummaryStat, fi_test, mape_hotspots, paired_t_test, pmd_test, summarize
from .simulate import Dataset, FunctionalForm, SimConfig, Site, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "CGANRegressor",
    "CUTOFFS",
    "CganConfig",
    "CganModel",
    "Dataset",
    "EbEstimate",
    "EbMethod",
    "ExperimentReport",
    "ExperimentSpec",
    "FunctionalForm",
    "InvalidParameterError",
    "MapeSet",
    "NbFit",
    "NegativeBinomialSPF",
    "RankDeficiencyError",
    "ScreeningResult",
    "ShapeError",
    "SimConfig",
    "Site",
    "SummaryStat",
    "TrainingDivergenceError",
    "builtin_grid",
    "cgan_eb",
    "emit_histogram",
    "emit_report",
    "estimate_dispersion_aux_ols",
    "fi_test",
    "fit_nb",
    "fit_poisson_glm",
    "get_experiment",
    "load_spec",
    "mape_hotspots",
    "nb_eb",
    "nb_pmf",
    "paired_t_test",
    "pmd_test",
    "predictive_moments",
    "run_experiment",
    "sample",
    "simulate_dataset",
    "summarize",
    "train",
]
