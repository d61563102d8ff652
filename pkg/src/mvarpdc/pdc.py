"""Partial directed coherence from MVAR coefficients.

Arrays are source-major: ``psi[k, j, f]`` is the PDC from channel ``k`` to
channel ``j`` at bin ``f``. Frequencies are in cycles/sample, 0.5 = Nyquist.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateColumn, ShapeMismatch

DEFAULT_N_FREQS = 128
DEGENERATE_NORM = 1e-14


def frequency_grid(n_freqs=DEFAULT_N_FREQS):
    """``n_freqs`` uniform points on [0, 0.5], both ends included."""
    if n_freqs < 2:
        raise ConfigError("n_freqs must be >= 2")
    return 0.5 * np.arange(n_freqs) / (n_freqs - 1)


@dataclass(frozen=True, eq=False)
class SpectralCoeffMatrix:
    """``abar[f] = I - sum_p A(p) exp(-2 pi i p f)``, shape (N_f, K, K)."""

    abar: np.ndarray
    freqs: np.ndarray

    @property
    def n_channels(self):
        return self.abar.shape[1]


@dataclass(frozen=True, eq=False)
class PdcSpectrum:
    psi: np.ndarray
    freqs: np.ndarray
    averaged: bool = False
    degenerate: np.ndarray | None = None   # (K, N_f) flags for vanished columns

    @property
    def n_channels(self):
        return self.psi.shape[0]

    def direction(self, source, target):
        """PDC curve for ``source -> target`` (0-based channel indices)."""
        return self.psi[source, target]


def spectral_transform(model, n_freqs=DEFAULT_N_FREQS, freqs=None) -> SpectralCoeffMatrix:
    """Evaluate the spectral coefficient matrix of ``model`` on a frequency grid.

    ``model`` may be an ``MvarModel`` or a raw (P, K, K) array.
    """
    coeffs = np.asarray(getattr(model, "coeffs", model), dtype=float)
    freqs = frequency_grid(n_freqs) if freqs is None else np.asarray(freqs, dtype=float)
    order, k, _ = coeffs.shape
    lags = np.arange(1, order + 1)
    phase = np.exp(-2j * np.pi * np.outer(freqs, lags))          # (N_f, P)
    abar = np.eye(k)[None, :, :] - np.einsum("fp,pjk->fjk", phase, coeffs)
    return SpectralCoeffMatrix(abar, freqs)


def _pdc_from_abar(abar, freqs, averaged):
    mag = np.abs(abar)                                   # (N_f, j, k)
    norms = np.sqrt(np.sum(mag ** 2, axis=1))            # (N_f, k)
    bad = norms < DEGENERATE_NORM
    safe = np.where(bad, 1.0, norms)
    psi = mag / safe[:, None, :]
    psi = np.where(bad[:, None, :], 0.0, psi)
    degenerate = bad.T.copy()
    if bad.any():
        f_idx, k_idx = np.nonzero(bad)
        where = ", ".join(f"(k={k + 1}, f={freqs[f]:.4g})" for f, k in zip(f_idx[:5], k_idx[:5]))
        warnings.warn(f"vanishing spectral column at {bad.sum()} bin(s): {where}; PDC set to 0",
                      DegenerateColumn, stacklevel=3)
    # (f, j, k) -> (k, j, f)
    return PdcSpectrum(np.ascontiguousarray(psi.transpose(2, 1, 0)), freqs, averaged, degenerate)


def pdc_single(abar: SpectralCoeffMatrix) -> PdcSpectrum:
    return _pdc_from_abar(abar.abar, abar.freqs, averaged=False)


def pdc_trial_averaged(abars: Sequence[SpectralCoeffMatrix]) -> PdcSpectrum:
    """PDC of the trial-mean spectral matrix (coefficients are averaged, not PDCs)."""
    abars = list(abars)
    if not abars:
        raise ShapeMismatch("need at least one spectral matrix")
    first = abars[0]
    for a in abars[1:]:
        if a.abar.shape != first.abar.shape or not np.array_equal(a.freqs, first.freqs):
            raise ShapeMismatch("spectral matrices differ in grid or channel count")
    mean = np.mean([a.abar for a in abars], axis=0)
    return _pdc_from_abar(mean, first.freqs, averaged=True)


def pdc_from_models(models, n_freqs=DEFAULT_N_FREQS) -> PdcSpectrum:
    """Trial-averaged PDC of per-trial models.

    The spectral matrix is linear in the coefficients, so this equals the PDC
    of the averaged model; it is computed that way.
    """
    models = list(models)
    coeffs = np.mean([np.asarray(getattr(m, "coeffs", m)) for m in models], axis=0)
    pdc = pdc_single(spectral_transform(coeffs, n_freqs))
    return PdcSpectrum(pdc.psi, pdc.freqs, True, pdc.degenerate)
