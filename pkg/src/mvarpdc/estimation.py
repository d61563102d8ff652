"""MVAR coefficient estimation: the lagged regression system, least squares,
and the sparse Bayesian (ARD) EM estimator.

Coefficient layout: ``coeffs[p, j, k]`` is the weight of ``s_k(t - p - 1)``
in ``s_j(t)``. Row ``j`` of the stacked matrix ``[A(1) ... A(P)]`` is the
regression vector of channel ``j``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _backend
from .errors import (
    ConfigError,
    IllConditioned,
    InsufficientSamples,
    NumericalBreakdown,
    ShapeMismatch,
)

# cond(Phi^T Phi) must stay below 1/sqrt(machine eps)
MAX_GRAM_CONDITION = 1.0 / np.sqrt(np.finfo(float).eps)


class Method(str, enum.Enum):
    LEAST_SQUARES = "ls"
    SPARSE_BAYES = "sparse"


@dataclass(frozen=True, eq=False)
class YuleWalkerSystem:
    """``targets[k] = phi @ x_k + e_k`` for every channel ``k``.

    Column ``(p - 1) * K + m`` of ``phi`` holds channel ``m`` delayed by ``p``.
    """

    phi: np.ndarray
    targets: np.ndarray
    order: int
    n_channels: int

    @property
    def n_rows(self):
        return self.phi.shape[0]

    @cached_property
    def outer(self):
        return _backend.packed_outer(self.phi)


@dataclass(frozen=True)
class ChannelDiagnostics:
    iterations: float
    rel_change: float
    n_pruned: int
    converged: bool


@dataclass(frozen=True, eq=False)
class MvarModel:
    coeffs: np.ndarray
    method: Method = Method.LEAST_SQUARES
    diagnostics: tuple = ()

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ShapeMismatch(f"coefficients must have shape (P, K, K), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise NumericalBreakdown("non-finite MVAR coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "method", Method(self.method))

    @property
    def order(self):
        return self.coeffs.shape[0]

    @property
    def n_channels(self):
        return self.coeffs.shape[1]

    def stacked(self):
        """(K, P*K) matrix whose row k is the regression vector of channel k."""
        return self.coeffs.transpose(1, 0, 2).reshape(self.n_channels, -1)

    @classmethod
    def from_stacked(cls, rows, order, **kw):
        rows = np.asarray(rows)
        k = rows.shape[0]
        return cls(rows.reshape(k, order, k).transpose(1, 0, 2), **kw)

    @classmethod
    def zeros(cls, order, k, **kw):
        return cls(np.zeros((order, k, k)), **kw)


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 500
    rel_tol: float = 1e-6
    prune_threshold: float = 1e12
    nu_init: float = 1.0
    lambda_init: str = "isotropic"   # "isotropic": 1/var(y_k); "unit": 1
    noise: str = "isotropic"         # "isotropic": scalar precision; "diagonal": one per sample

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be > 0")
        if not self.prune_threshold > 1:
            raise ConfigError("prune_threshold must be > 1")
        if not self.nu_init > 0:
            raise ConfigError("nu_init must be > 0")
        if self.lambda_init not in ("isotropic", "unit"):
            raise ConfigError(f"lambda_init must be 'isotropic' or 'unit', got {self.lambda_init!r}")
        if self.noise not in ("diagonal", "isotropic"):
            raise ConfigError(f"noise must be 'diagonal' or 'isotropic', got {self.noise!r}")


@dataclass(frozen=True, eq=False)
class SparseBayesState:
    """Posterior for one channel: mean ``x_bar`` and precision ``gamma``."""

    x_bar: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray
    lam: np.ndarray


def build_yule_walker(series, order: int) -> YuleWalkerSystem:
    """Stack the lagged regression for one trial, ``series`` shaped (K, N_T)."""
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeMismatch(f"series must be (K, N_T), got shape {s.shape}")
    if order < 1:
        raise ConfigError("model order must be >= 1")
    k, n = s.shape
    if n <= order * k + 1:
        raise InsufficientSamples(f"N_T={n} samples but order*K+1={order * k + 1}; system is not overdetermined")
    phi = np.empty((n - order, order * k))
    for p in range(1, order + 1):
        phi[:, (p - 1) * k:p * k] = s[:, order - p:n - p].T
    targets = np.ascontiguousarray(s[:, order:])
    return YuleWalkerSystem(phi, targets, order, k)


def estimate_ls(system: YuleWalkerSystem) -> MvarModel:
    """Least squares through the SVD of ``phi`` (no normal equations)."""
    u, sv, vt = np.linalg.svd(system.phi, full_matrices=False)
    cond = np.inf if sv[-1] == 0 else (sv[0] / sv[-1]) ** 2
    if not cond < MAX_GRAM_CONDITION:
        raise IllConditioned(cond)
    x = ((system.targets @ u) / sv) @ vt
    return MvarModel.from_stacked(x, system.order, method=Method.LEAST_SQUARES)


def e_step(phi, y, nu, lam) -> SparseBayesState:
    """Posterior precision ``Phi^T Lambda Phi + diag(nu)`` and mean."""
    nu = np.asarray(nu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    gamma = phi.T @ (lam[:, None] * phi) + np.diag(nu)
    try:
        chol = scipy.linalg.cho_factor(gamma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("posterior precision is not positive definite") from exc
    x_bar = scipy.linalg.cho_solve(chol, phi.T @ (lam * y))
    return SparseBayesState(x_bar, gamma, nu.copy(), lam.copy())


def m_step(state: SparseBayesState, phi, y):
    """Hyperparameter updates ``(nu, lam)`` from a posterior (per-sample noise)."""
    cov = scipy.linalg.cho_solve(scipy.linalg.cho_factor(state.gamma, lower=True), np.eye(len(state.x_bar)))
    nu = 1.0 / (state.x_bar ** 2 + np.diag(cov))
    resid = y - phi @ state.x_bar
    lam = 1.0 / (resid ** 2 + np.einsum("ij,jk,ik->i", phi, cov, phi))
    return nu, lam


def _initial_lambda(y, n, cfg):
    if cfg.lambda_init == "unit":
        return np.ones(n)
    var = float(np.var(y))
    return np.full(n, 1.0 / var if var > 0 else 1.0)


def sparse_bayes_channel(system: YuleWalkerSystem, k: int, cfg: EmConfig):
    """EM for channel ``k``; returns ``(x, nu, lam, ChannelDiagnostics)``."""
    y = system.targets[k]
    m = system.phi.shape[1]
    nu = np.full(m, float(cfg.nu_init))
    lam = _initial_lambda(y, system.n_rows, cfg)
    x, pruned, iters, rel, status = _backend.sbl_em(
        system.phi, system.outer, y, nu, lam,
        int(cfg.max_iters), float(cfg.rel_tol), float(cfg.prune_threshold),
        cfg.noise == "isotropic",
    )
    if status in (_backend.STATUS_NOT_PD, _backend.STATUS_NONFINITE):
        raise NumericalBreakdown(
            f"sparse Bayes EM broke down on channel {k + 1} after {iters} iterations "
            f"({'non-PD posterior precision' if status == _backend.STATUS_NOT_PD else 'non-finite mean'})"
        )
    diag = ChannelDiagnostics(
        iterations=iters,
        rel_change=float(rel),
        n_pruned=int(np.count_nonzero(pruned)),
        converged=status == _backend.STATUS_CONVERGED,
    )
    return np.asarray(x), nu, lam, diag


def estimate_sparse_bayes(system: YuleWalkerSystem, cfg: EmConfig | None = None) -> MvarModel:
    cfg = cfg or EmConfig()
    rows, diags = [], []
    for k in range(system.n_channels):
        x, _, _, d = sparse_bayes_channel(system, k, cfg)
        rows.append(x)
        diags.append(d)
    return MvarModel.from_stacked(np.array(rows), system.order,
                                  method=Method.SPARSE_BAYES, diagnostics=tuple(diags))


def estimate(system: YuleWalkerSystem, method=Method.LEAST_SQUARES, em: EmConfig | None = None) -> MvarModel:
    if Method(method) is Method.LEAST_SQUARES:
        return estimate_ls(system)
    return estimate_sparse_bayes(system, em)


def fit_trials(data, order, method=Method.LEAST_SQUARES, em: EmConfig | None = None):
    """One model per trial of a (trials, K, N_T) array or ``TrialSet``."""
    from .signalgen import trial_array

    data = trial_array(data)
    return [estimate(build_yule_walker(trial, order), method, em) for trial in data]


def average_models(models: Sequence[MvarModel]) -> MvarModel:
    """Element-wise mean of coefficients; diagnostics become per-channel means."""
    models = list(models)
    if not models:
        raise ShapeMismatch("cannot average an empty list of models")
    first = models[0]
    for mdl in models[1:]:
        if mdl.coeffs.shape != first.coeffs.shape or mdl.method is not first.method:
            raise ShapeMismatch(
                f"model mismatch: {mdl.coeffs.shape}/{mdl.method.value} vs "
                f"{first.coeffs.shape}/{first.method.value}"
            )
    coeffs = np.mean([mdl.coeffs for mdl in models], axis=0)
    diags = ()
    if all(mdl.diagnostics for mdl in models):
        diags = tuple(
            ChannelDiagnostics(
                iterations=float(np.mean([mdl.diagnostics[k].iterations for mdl in models])),
                rel_change=float(np.max([mdl.diagnostics[k].rel_change for mdl in models])),
                n_pruned=int(round(np.mean([mdl.diagnostics[k].n_pruned for mdl in models]))),
                converged=all(mdl.diagnostics[k].converged for mdl in models),
            )
            for k in range(first.n_channels)
        )
    return MvarModel(coeffs, method=first.method, diagnostics=diags)
