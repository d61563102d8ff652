"""Statistical thresholds for PDC.

Two ways of building a null sample of trial-averaged PDC spectra:

* surrogate bootstrap: every trial is phase-randomized channel by channel and
  the whole estimation pipeline is re-run;
* permutation: half the per-trial task models and half the per-trial control
  models are averaged together.

Both nulls go through ``threshold_from_null``, which standardizes each
(direction, bin), takes a maximum statistic and maps its upper quantile back
to the PDC scale.
"""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import estimation as est
from .errors import ConfigError, DegenerateNull, OddTrialCount, ShapeMismatch
from .pdc import DEFAULT_N_FREQS, PdcSpectrum, frequency_grid, pdc_from_models
from .signalgen import STREAM_PERMUTATION, STREAM_SURROGATE, keyed_rng, trial_array

DEGENERATE_STD = 1e-14


class Scope(str, enum.Enum):
    PER_DIRECTION = "per_direction"
    POOLED = "pooled"


class Strategy(str, enum.Enum):
    # max over resamples per bin, quantile across bins
    LITERAL = "literal"
    # max over bins per resample, quantile across resamples
    WESTFALL_YOUNG = "westfall_young"


class ThresholdMethod(str, enum.Enum):
    SURROGATE = "surrogate"
    PERMUTATION = "permutation"


@dataclass(frozen=True)
class SurrogateConfig:
    n_boot: int = 200
    alpha: float = 0.05
    seed: int = 0
    estimator: est.Method = est.Method.LEAST_SQUARES
    em: est.EmConfig = field(default_factory=est.EmConfig)
    scope: Scope = Scope.PER_DIRECTION
    strategy: Strategy = Strategy.LITERAL
    order: int = 2
    n_freqs: int = DEFAULT_N_FREQS
    jobs: int = 1

    def __post_init__(self):
        for name, typ in (("estimator", est.Method), ("scope", Scope), ("strategy", Strategy)):
            object.__setattr__(self, name, typ(getattr(self, name)))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_boot < 20:
            raise ConfigError(f"n_boot must be >= 20, got {self.n_boot}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """Per-direction, per-bin threshold; ``threshold[k, j, f]`` for ``k -> j``.

    Diagonal entries are 1.0 (never exceeded by a PDC value).
    """

    threshold: np.ndarray
    freqs: np.ndarray
    method: ThresholdMethod
    alpha: float
    scope: Scope
    strategy: Strategy
    null_mean: np.ndarray
    null_std: np.ndarray
    t_max: np.ndarray
    t_threshold: np.ndarray
    degenerate: np.ndarray
    null_pdc: np.ndarray = field(repr=False)


def _quantile_index(alpha, n):
    # 1-based ceil((1 - alpha) * n), clamped to [1, n]
    idx = math.ceil((1.0 - alpha) * n - 1e-9)
    return min(max(idx, 1), n)


def threshold_from_null(null_psi, alpha, freqs=None, method=ThresholdMethod.SURROGATE,
                        scope=Scope.PER_DIRECTION, strategy=Strategy.LITERAL) -> ThresholdCurve:
    """Max-statistic threshold from a null sample shaped (N_B, K, K, N_f)."""
    null_psi = np.asarray(null_psi, dtype=float)
    if null_psi.ndim != 4 or null_psi.shape[1] != null_psi.shape[2]:
        raise ShapeMismatch(f"null sample must be (N_B, K, K, N_f), got {null_psi.shape}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    scope, strategy = Scope(scope), Strategy(strategy)
    n_boot, k, _, n_f = null_psi.shape
    freqs = frequency_grid(n_f) if freqs is None else np.asarray(freqs)
    off = ~np.eye(k, dtype=bool)

    mean = null_psi.mean(axis=0)
    std = null_psi.std(axis=0)
    degenerate = (std < DEGENERATE_STD) & off[:, :, None]
    safe = np.where(std < DEGENERATE_STD, 1.0, std)
    t = np.where(std < DEGENERATE_STD, 0.0, (null_psi - mean) / safe)   # (B, K, K, F)
    t_off = t[:, off, :]                                                  # (B, D, F)

    if strategy is Strategy.LITERAL:
        if scope is Scope.PER_DIRECTION:
            stat = t_off.max(axis=0)                                      # (D, F)
        else:
            stat = t_off.max(axis=(0, 1))                                 # (F,)
        pick = _quantile_index(alpha, n_f) - 1
    else:
        if scope is Scope.PER_DIRECTION:
            stat = t_off.max(axis=2).T                                    # (D, B)
        else:
            stat = t_off.max(axis=(1, 2))                                 # (B,)
        pick = _quantile_index(alpha, n_boot) - 1
    t_th = np.sort(stat, axis=-1)[..., pick]

    thr = np.ones((k, k, n_f))
    t_th_dir = np.broadcast_to(t_th, (int(off.sum()),)) if np.ndim(t_th) == 0 else t_th
    thr[off] = t_th_dir[:, None] * std[off] + mean[off]
    thr[degenerate] = mean[degenerate]
    if degenerate.any():
        src, dst, f_idx = np.nonzero(degenerate)
        where = ", ".join(f"{a + 1}->{b + 1}@{freqs[f]:.4g}" for a, b, f in zip(src[:5], dst[:5], f_idx[:5]))
        warnings.warn(f"null distribution is constant at {degenerate.sum()} (direction, bin) pair(s): "
                      f"{where}; threshold set to the null mean there", DegenerateNull, stacklevel=2)

    t_max = np.zeros((k, k) + stat.shape[-1:]) if scope is Scope.PER_DIRECTION else stat
    if scope is Scope.PER_DIRECTION:
        t_max[off] = stat
    t_th_full = np.zeros((k, k))
    t_th_full[off] = t_th_dir
    return ThresholdCurve(
        threshold=thr, freqs=freqs, method=ThresholdMethod(method), alpha=float(alpha),
        scope=scope, strategy=strategy, null_mean=mean, null_std=std,
        t_max=t_max, t_threshold=t_th_full, degenerate=degenerate, null_pdc=null_psi,
    )


def randomize_spectrum(series, rng):
    """Phase-randomize each row of ``series`` (K, N_T); returns the complex inverse DFT.

    Bins k and N-k get opposite phases and the DC (and, for even N, Nyquist)
    bins keep theirs, so the imaginary part is rounding error only.
    """
    x = np.asarray(series, dtype=float)
    n_ch, n = x.shape
    spec = np.fft.fft(x, axis=1)
    half = (n - 1) // 2                     # bins 1..half have a distinct mirror
    eps = rng.uniform(-np.pi, np.pi, size=(n_ch, half))
    phase = np.zeros((n_ch, n))
    phase[:, 1:half + 1] = eps
    phase[:, n - half:] = -eps[:, ::-1]
    return np.fft.ifft(spec * np.exp(-1j * phase), axis=1)


def phase_randomize(series, seed=None, rng=None):
    """Real surrogate with the amplitude spectrum of ``series``, per channel."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if np.shape(series)[-1] < 4:
        raise ConfigError("phase randomization needs at least 4 samples")
    return randomize_spectrum(series, rng).real


def _surrogate_pdc(beta, data, cfg):
    surr = np.empty_like(data)
    for m in range(data.shape[0]):
        surr[m] = randomize_spectrum(data[m], keyed_rng(cfg.seed, STREAM_SURROGATE, beta, m)).real
    models = est.fit_trials(surr, cfg.order, cfg.estimator, cfg.em)
    return pdc_from_models(models, cfg.n_freqs).psi


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def surrogate_null(trials, cfg: SurrogateConfig) -> np.ndarray:
    """Null PDC sample (N_B, K, K, N_f) from phase-randomized copies of ``trials``."""
    data = trial_array(trials)
    if data.ndim != 3 or data.shape[0] < 1:
        raise ShapeMismatch("trials must be a non-empty (trials, K, N_T) array")
    return np.stack(_pmap(partial(_surrogate_pdc, data=data, cfg=cfg), range(cfg.n_boot), cfg.jobs))


def surrogate_threshold(trials, cfg: SurrogateConfig) -> ThresholdCurve:
    null = surrogate_null(trials, cfg)
    return threshold_from_null(null, cfg.alpha, frequency_grid(cfg.n_freqs), ThresholdMethod.SURROGATE,
                               cfg.scope, cfg.strategy)


def permutation_draws(n_trials, n_boot, seed):
    """Yield ``(task_idx, control_idx)`` per resample, each of size n_trials/2."""
    if n_trials % 2:
        raise OddTrialCount(f"permutation test needs an even trial count, got {n_trials}")
    half = n_trials // 2
    for beta in range(n_boot):
        rng = keyed_rng(seed, STREAM_PERMUTATION, beta)
        yield (np.sort(rng.choice(n_trials, half, replace=False)),
               np.sort(rng.choice(n_trials, half, replace=False)))


def permutation_null(task_models, control_models, cfg: SurrogateConfig) -> np.ndarray:
    task = np.array([np.asarray(getattr(m, "coeffs", m)) for m in task_models])
    ctrl = np.array([np.asarray(getattr(m, "coeffs", m)) for m in control_models])
    if len(task) != len(ctrl):
        raise ShapeMismatch(f"{len(task)} task models vs {len(ctrl)} control models")
    if len(task) % 2:
        raise OddTrialCount(f"permutation test needs an even trial count, got {len(task)}")
    if task.shape[1:] != ctrl.shape[1:]:
        raise ShapeMismatch(f"task models {task.shape[1:]} vs control models {ctrl.shape[1:]}")
    out = []
    for ti, ci in permutation_draws(len(task), cfg.n_boot, cfg.seed):
        mixed = np.concatenate([task[ti], ctrl[ci]])
        out.append(pdc_from_models(mixed, cfg.n_freqs).psi)
    return np.stack(out)


def permutation_threshold(task_models, control_models, cfg: SurrogateConfig) -> ThresholdCurve:
    null = permutation_null(task_models, control_models, cfg)
    return threshold_from_null(null, cfg.alpha, frequency_grid(cfg.n_freqs), ThresholdMethod.PERMUTATION,
                               cfg.scope, cfg.strategy)


def apply_threshold(pdc: PdcSpectrum, thr: ThresholdCurve) -> np.ndarray:
    """Boolean mask ``psi > threshold``; the diagonal is always False."""
    if pdc.psi.shape != thr.threshold.shape:
        raise ShapeMismatch(f"PDC {pdc.psi.shape} vs threshold {thr.threshold.shape}")
    if not np.allclose(pdc.freqs, thr.freqs, rtol=0, atol=1e-12):
        raise ShapeMismatch("PDC and threshold use different frequency grids")
    mask = pdc.psi > thr.threshold
    k = mask.shape[0]
    mask[np.arange(k), np.arange(k)] = False
    return mask
