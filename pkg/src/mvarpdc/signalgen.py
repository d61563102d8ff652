"""Synthetic multichannel trials: the coupled 3-source MVAR scenario, the
independent low-pass scenario, additive interference, and SIR mixing.

Every random draw comes from a ``numpy.random.SeedSequence`` keyed by
``(seed, stream, trial[, channel])``, so a trial's samples do not depend on
how many other trials are generated or in which order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.signal

from . import _backend
from .errors import ConfigError, DimensionMismatch, NonStationaryModel

# Interacting scenario generator: s(t) = A1 s(t-1) + A2 s(t-2) + e(t).
# Source 2 drives source 3, source 3 drives source 1.
INTERACTING_COEFFS = np.array(
    [
        [[0.8, 0.0, 0.4], [0.0, 0.9, 0.0], [0.0, 0.5, 0.5]],
        [[-0.5, 0.0, 0.0], [0.0, -0.8, 0.0], [0.0, 0.0, -0.2]],
    ]
)
INTERACTING_COEFFS.setflags(write=False)

DEFAULT_CUTOFFS = (0.3, 0.2, 0.15)
LOWPASS_TAPS = 65  # order-64 FIR

# SeedSequence spawn-key stream tags
STREAM_SIGNAL = 0
STREAM_INTERFERENCE = 1
STREAM_CONTROL = 2
STREAM_SURROGATE = 3
STREAM_PERMUTATION = 4


def keyed_rng(seed, *key):
    """Generator for the substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class TrialSet:
    """Multichannel trials, ``data[trial, channel, time]``.

    The array is stored read-only; derive new sets instead of mutating.
    """

    data: np.ndarray
    seed: Optional[int] = None
    labels: Optional[tuple] = None
    sfreq: float = 1.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 3:
            raise DimensionMismatch(f"TrialSet data must be 3-D (trial, channel, time), got {data.ndim}-D")
        if min(data.shape) < 1:
            raise DimensionMismatch(f"TrialSet has an empty axis: {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("TrialSet data contains NaN or Inf")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(f"s{k + 1}" for k in range(data.shape[1])))
        elif len(self.labels) != data.shape[1]:
            raise DimensionMismatch("one label per channel required")

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def __len__(self):
        return self.n_trials

    def __getitem__(self, m):
        return self.data[m]

    def replace(self, data, **kw) -> "TrialSet":
        kw.setdefault("seed", self.seed)
        kw.setdefault("labels", self.labels)
        kw.setdefault("sfreq", self.sfreq)
        return TrialSet(data, **kw)


def trial_array(trials) -> np.ndarray:
    """The (trials, K, N_T) array behind a ``TrialSet`` or array-like."""
    if isinstance(trials, TrialSet):
        return trials.data
    return np.asarray(trials, dtype=np.float64)


class Scenario(str, enum.Enum):
    INTERACTING = "interacting"
    NONINTERACTING = "noninteracting"


@dataclass(frozen=True)
class Ar1Colored:
    rho: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"AR(1) pole must lie in (0, 1), got {self.rho}")

    def to_string(self):
        return f"ar1:{self.rho!r}"


@dataclass(frozen=True)
class OneOverF:
    def to_string(self):
        return "1/f"


@dataclass(frozen=True)
class FromFile:
    path: str

    def to_string(self):
        return f"file:{self.path}"


Interference = Union[Ar1Colored, OneOverF, FromFile]


def parse_interference(text: str) -> Interference:
    """Parse ``ar1``, ``ar1:<rho>``, ``1/f`` or ``file:<path>``."""
    text = text.strip()
    low = text.lower()
    if low == "ar1":
        return Ar1Colored()
    if low.startswith("ar1:"):
        try:
            return Ar1Colored(float(text[4:]))
        except ValueError as exc:
            raise ConfigError(f"bad AR(1) pole in {text!r}") from exc
    if low in ("1/f", "oneoverf", "pink"):
        return OneOverF()
    if low.startswith("file:"):
        return FromFile(text[5:])
    raise ConfigError(f"unknown interference kind {text!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = Scenario.INTERACTING
    n_trials: int = 40
    n_samples: int = 600
    sir: float = math.inf
    interference: Interference = field(default_factory=Ar1Colored)
    burn_in: int = 500
    cutoffs: tuple = DEFAULT_CUTOFFS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "cutoffs", tuple(float(c) for c in self.cutoffs))
        if self.n_trials < 1 or self.n_samples < 1:
            raise ConfigError("n_trials and n_samples must be positive")
        if not self.sir > 0:
            raise ConfigError(f"sir must be > 0, got {self.sir}")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if len(self.cutoffs) != 3 or not all(0.0 < c < 0.5 for c in self.cutoffs):
            raise ConfigError(f"cutoffs must be three values in (0, 0.5), got {self.cutoffs}")


def companion_radius(coeffs) -> float:
    """Spectral radius of the companion matrix of a (P, K, K) coefficient stack."""
    coeffs = np.asarray(coeffs, dtype=float)
    order, k, _ = coeffs.shape
    comp = np.zeros((order * k, order * k))
    comp[:k, :] = np.hstack(list(coeffs))
    comp[k:, :-k] = np.eye((order - 1) * k)
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def stationary_covariance(coeffs, noise_cov=None):
    """Lag-0 covariance of a stable VAR, via the companion-form Lyapunov equation."""
    import scipy.linalg

    coeffs = np.asarray(coeffs, dtype=float)
    order, k, _ = coeffs.shape
    comp = np.zeros((order * k, order * k))
    comp[:k, :] = np.hstack(list(coeffs))
    comp[k:, :-k] = np.eye((order - 1) * k)
    q = np.zeros_like(comp)
    q[:k, :k] = np.eye(k) if noise_cov is None else noise_cov
    return scipy.linalg.solve_discrete_lyapunov(comp, q)[:k, :k]


def simulate_mvar(coeffs, n_trials, n_samples, seed, burn_in=500, stream=STREAM_SIGNAL):
    """Simulate a VAR driven by unit-variance white Gaussian innovations.

    Each trial starts from zero and discards ``burn_in`` samples.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    radius = companion_radius(coeffs)
    if radius >= 1.0:
        raise NonStationaryModel(radius)
    k = coeffs.shape[1]
    out = np.empty((n_trials, k, n_samples))
    for m in range(n_trials):
        rng = keyed_rng(seed, stream, m)
        innov = rng.standard_normal((burn_in + n_samples, k))
        out[m] = _backend.simulate_var(coeffs, innov)[burn_in:].T
    return out


def generate_interacting(cfg: ScenarioConfig) -> TrialSet:
    if cfg.scenario is not Scenario.INTERACTING:
        raise ConfigError("generate_interacting needs scenario=interacting")
    data = simulate_mvar(INTERACTING_COEFFS, cfg.n_trials, cfg.n_samples, cfg.seed, cfg.burn_in)
    return TrialSet(data, seed=cfg.seed)


def lowpass_fir(cutoff, numtaps=LOWPASS_TAPS):
    """Hamming-windowed sinc; ``cutoff`` in cycles/sample (0.5 = Nyquist)."""
    return scipy.signal.firwin(numtaps, cutoff, window="hamming", fs=1.0)


def generate_noninteracting(cfg: ScenarioConfig) -> TrialSet:
    """Independent white noise per channel through zero-phase low-pass filters."""
    if cfg.scenario is not Scenario.NONINTERACTING:
        raise ConfigError("generate_noninteracting needs scenario=noninteracting")
    taps = [lowpass_fir(c) for c in cfg.cutoffs]
    pad = LOWPASS_TAPS - 1
    out = np.empty((cfg.n_trials, len(taps), cfg.n_samples))
    for m in range(cfg.n_trials):
        for ch, h in enumerate(taps):
            rng = keyed_rng(cfg.seed, STREAM_SIGNAL, m, ch)
            white = rng.standard_normal(cfg.burn_in + cfg.n_samples + pad)
            # 'valid' convolution with a symmetric kernel is delay-compensated
            x = np.convolve(white, h, mode="valid")[cfg.burn_in:]
            out[m, ch] = x / x.std()
    return TrialSet(out, seed=cfg.seed)


def generate(cfg: ScenarioConfig) -> TrialSet:
    if cfg.scenario is Scenario.INTERACTING:
        return generate_interacting(cfg)
    return generate_noninteracting(cfg)


def _standardize(x):
    sd = x.std(axis=-1, keepdims=True)
    if np.any(sd == 0):
        raise ValueError("cannot standardize a constant channel")
    return x / sd


def make_interference(kind: Interference, n_trials, n_channels, n_samples, seed,
                      stream=STREAM_INTERFERENCE) -> TrialSet:
    """Unit-variance interference, independent across channels and trials."""
    if isinstance(kind, FromFile):
        from .io import load_timeseries_csv

        loaded = load_timeseries_csv(kind.path)
        want = (n_trials, n_channels, n_samples)
        if loaded.shape != want:
            raise DimensionMismatch(
                f"interference file {kind.path} has dims {loaded.shape}, expected {want}"
            )
        return loaded.replace(_standardize(loaded.data), seed=seed)

    out = np.empty((n_trials, n_channels, n_samples))
    for m in range(n_trials):
        for ch in range(n_channels):
            rng = keyed_rng(seed, stream, m, ch)
            if isinstance(kind, Ar1Colored):
                rho = kind.rho
                w = rng.standard_normal(n_samples)
                w[0] /= math.sqrt(1.0 - rho * rho)  # stationary start
                x = scipy.signal.lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], w)
            elif isinstance(kind, OneOverF):
                spec = np.fft.rfft(rng.standard_normal(n_samples))
                f = np.fft.rfftfreq(n_samples)
                spec[0] = 0.0
                spec[1:] /= np.sqrt(f[1:])
                x = np.fft.irfft(spec, n=n_samples)
            else:
                raise ConfigError(f"unsupported interference kind {kind!r}")
            out[m, ch] = x
    return TrialSet(_standardize(out), seed=seed)


def sir_scale(signal: TrialSet, interference: TrialSet, sir: float) -> np.ndarray:
    """Per-trial interference gain giving an RMS signal/interference ratio of ``sir``."""
    if signal.shape != interference.shape:
        raise DimensionMismatch(f"signal {signal.shape} vs interference {interference.shape}")
    if not sir > 0:
        raise ConfigError(f"sir must be > 0, got {sir}")
    if math.isinf(sir):
        return np.zeros(signal.n_trials)
    ps = np.sum(signal.data ** 2, axis=(1, 2))
    pi = np.sum(interference.data ** 2, axis=(1, 2))
    if np.any(pi == 0):
        raise ValueError("interference has zero power in some trial")
    return np.sqrt(ps / pi) / sir


def mix_at_sir(signal: TrialSet, interference: TrialSet, sir: float) -> TrialSet:
    """``signal + alpha * interference`` with alpha chosen per trial.

    SIR is an amplitude (RMS) ratio over all channels and samples of a trial.
    """
    alpha = sir_scale(signal, interference, sir)
    if math.isinf(sir):
        return signal.replace(signal.data)
    return signal.replace(signal.data + alpha[:, None, None] * interference.data)


def rms_ratio(signal: TrialSet, mixed: TrialSet) -> np.ndarray:
    """Per-trial RMS ratio of ``signal`` to ``mixed - signal``."""
    resid = mixed.data - signal.data
    return np.sqrt(np.sum(signal.data ** 2, axis=(1, 2)) / np.sum(resid ** 2, axis=(1, 2)))
