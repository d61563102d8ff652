"""MVAR estimation, partial directed coherence and significance thresholds
for multichannel trials contaminated by additive interference."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    ConfigError, DegenerateColumn, DegenerateNull, DimensionMismatch, FileFormatError,
    IllConditioned, InsufficientSamples, MvarPdcError, NonStationaryModel,
    NumericalBreakdown, OddTrialCount, ShapeMismatch,
)
from .signalgen import (
    Ar1Colored, FromFile, OneOverF, Scenario, ScenarioConfig, TrialSet, generate,
    make_interference, mix_at_sir, parse_interference, simulate_mvar,
)
from .estimation import (
    EmConfig, Method, MvarModel, average_models, build_yule_walker, estimate,
    estimate_ls, estimate_sparse_bayes, fit_trials,
)
from .pdc import PdcSpectrum, frequency_grid, pdc_from_models, pdc_single, spectral_transform
from .significance import (
    Scope, Strategy, SurrogateConfig, ThresholdCurve, ThresholdMethod, apply_threshold,
    permutation_threshold, phase_randomize, surrogate_threshold, threshold_from_null,
)
from .io import load_timeseries_csv, save_timeseries_csv
from .experiment import (
    ExperimentConfig, ExperimentResult, StageError, Thresholding, emit_outputs, run_experiment,
)
