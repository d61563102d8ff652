"""End-to-end experiment: simulate, mix interference, fit, PDC, thresholds, write files."""
from __future__ import annotations

import dataclasses
import enum
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, _backend
from . import estimation as est
from . import io as mio
from . import signalgen as sg
from . import significance as sig
from .errors import ConfigError, MvarPdcError
from .pdc import DEFAULT_N_FREQS, PdcSpectrum, pdc_from_models

FORMAT_VERSION = 1
DEFAULT_SIR_SWEEP = (2.0, 1.0, 0.5, 0.25)

SIR_CONVENTION = ("RMS amplitude ratio of signal to scaled interference, over all channels "
                  "and samples of each trial")
CONTROL_CONVENTION = ("control trials are fresh interference draws scaled by the same per-trial "
                      "gain as the task interference (equal absolute interference power)")


class Thresholding(str, enum.Enum):
    NONE = "none"
    SURROGATE = "surrogate"
    PERMUTATION = "permutation"
    BOTH = "both"

    def methods(self):
        return {
            Thresholding.NONE: (),
            Thresholding.SURROGATE: (sig.ThresholdMethod.SURROGATE,),
            Thresholding.PERMUTATION: (sig.ThresholdMethod.PERMUTATION,),
            Thresholding.BOTH: (sig.ThresholdMethod.SURROGATE, sig.ThresholdMethod.PERMUTATION),
        }[self]


class StageError(MvarPdcError):
    """A module error annotated with the SIR level and pipeline stage it came from."""

    def __init__(self, sir, stage, cause):
        self.sir, self.stage, self.cause = sir, stage, cause
        super().__init__(f"SIR={sir_label(sir)} stage={stage}: {type(cause).__name__}: {cause}")


def sir_label(sir) -> str:
    return "inf" if math.isinf(sir) else f"{sir:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: sg.Scenario = sg.Scenario.INTERACTING
    n_trials: int = 40
    n_samples: int = 600
    burn_in: int = 500
    cutoffs: tuple = sg.DEFAULT_CUTOFFS
    interference: str = "ar1:0.95"
    estimator: est.Method = est.Method.LEAST_SQUARES
    em: est.EmConfig = field(default_factory=est.EmConfig)
    model_order: int = 2
    sir_sweep: tuple = DEFAULT_SIR_SWEEP
    thresholding: Thresholding = Thresholding.BOTH
    n_boot: int = 200
    alpha: float = 0.05
    scope: sig.Scope = sig.Scope.PER_DIRECTION
    strategy: sig.Strategy = sig.Strategy.LITERAL
    n_freqs: int = DEFAULT_N_FREQS
    output_dir: Optional[str] = None
    seed: int = 0
    jobs: int = 1
    record_timings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenario", sg.Scenario(self.scenario))
        object.__setattr__(self, "estimator", est.Method(self.estimator))
        object.__setattr__(self, "thresholding", Thresholding(self.thresholding))
        object.__setattr__(self, "scope", sig.Scope(self.scope))
        object.__setattr__(self, "strategy", sig.Strategy(self.strategy))
        object.__setattr__(self, "sir_sweep", tuple(float(s) for s in self.sir_sweep))
        object.__setattr__(self, "cutoffs", tuple(float(c) for c in self.cutoffs))
        if isinstance(self.em, dict):
            object.__setattr__(self, "em", est.EmConfig(**self.em))
        if not self.sir_sweep:
            raise ConfigError("sir_sweep must not be empty")
        if any(not s > 0 for s in self.sir_sweep):
            raise ConfigError(f"every SIR must be > 0, got {self.sir_sweep}")
        if self.model_order < 1:
            raise ConfigError("model_order must be >= 1")
        if sig.ThresholdMethod.PERMUTATION in self.thresholding.methods():
            if any(math.isinf(s) for s in self.sir_sweep):
                raise ConfigError("permutation thresholding needs a finite SIR (control data is scaled interference)")
            if self.n_trials % 2:
                raise ConfigError("permutation thresholding needs an even n_trials")
        # validate the pieces eagerly
        self.scenario_config()
        self.interference_kind()
        if self.thresholding is not Thresholding.NONE:
            self.surrogate_config()

    def interference_kind(self):
        return sg.parse_interference(self.interference)

    def scenario_config(self, sir=math.inf) -> sg.ScenarioConfig:
        return sg.ScenarioConfig(
            scenario=self.scenario, n_trials=self.n_trials, n_samples=self.n_samples, sir=sir,
            interference=self.interference_kind(), burn_in=self.burn_in, cutoffs=self.cutoffs,
            seed=self.seed,
        )

    def surrogate_config(self) -> sig.SurrogateConfig:
        return sig.SurrogateConfig(
            n_boot=self.n_boot, alpha=self.alpha, seed=self.seed, estimator=self.estimator,
            em=self.em, scope=self.scope, strategy=self.strategy, order=self.model_order,
            n_freqs=self.n_freqs, jobs=self.jobs,
        )

    def to_dict(self, include_runtime=False) -> dict:
        """JSON-ready echo.

        ``jobs``, ``output_dir`` and ``record_timings`` do not affect results
        and are left out unless ``include_runtime`` is set.
        """
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in ("jobs", "output_dir", "record_timings") and not include_runtime:
                continue
            if isinstance(v, enum.Enum):
                v = v.value
            elif f.name == "em":
                v = dataclasses.asdict(v)
            elif isinstance(v, tuple):
                v = [_json_float(x) for x in v]
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ExperimentConfig":
        d = dict(d)
        d.update(overrides)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "sir_sweep" in d:
            d["sir_sweep"] = tuple(_parse_float(x) for x in d["sir_sweep"])
        return cls(**d)


def _json_float(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _parse_float(x):
    return math.inf if isinstance(x, str) and x.lower() in ("inf", "infinity") else float(x)


@dataclass(eq=False)
class SirRecord:
    sir: float
    model: est.MvarModel
    pdc: PdcSpectrum
    thresholds: dict
    masks: dict
    wall_clock: float
    timings: dict


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    records: list

    def record(self, sir) -> SirRecord:
        for r in self.records:
            if r.sir == sir or (math.isinf(sir) and math.isinf(r.sir)):
                return r
        raise KeyError(sir)


def _stage(sir, stage, timings, fn, *args, **kw):
    t0 = time.perf_counter()
    try:
        return fn(*args, **kw)
    except MvarPdcError as exc:
        raise StageError(sir, stage, exc) from exc
    finally:
        timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - t0


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every SIR level of ``cfg``.

    The signal, interference and control draws are shared across SIR levels;
    only the interference gain changes.
    """
    base_timings = {}
    signal = _stage(math.nan, "simulate", base_timings, sg.generate, cfg.scenario_config())
    kind = cfg.interference_kind()
    shape = (signal.n_trials, signal.n_channels, signal.n_samples)
    needs_interference = any(not math.isinf(s) for s in cfg.sir_sweep)
    methods = cfg.thresholding.methods()
    interference = control = None
    if needs_interference:
        interference = _stage(math.nan, "interference", base_timings, sg.make_interference,
                              kind, *shape, cfg.seed)
        if sig.ThresholdMethod.PERMUTATION in methods:
            ctrl_kind = sg.Ar1Colored() if isinstance(kind, sg.FromFile) else kind
            control = _stage(math.nan, "interference", base_timings, sg.make_interference,
                             ctrl_kind, *shape, cfg.seed, stream=sg.STREAM_CONTROL)
    scfg = cfg.surrogate_config() if methods else None

    records = []
    for i, sir in enumerate(cfg.sir_sweep):
        t_start = time.perf_counter()
        timings = dict(base_timings) if i == 0 else {}
        if math.isinf(sir):
            data = signal
            gain = np.zeros(signal.n_trials)
        else:
            gain = _stage(sir, "mix", timings, sg.sir_scale, signal, interference, sir)
            data = _stage(sir, "mix", timings, sg.mix_at_sir, signal, interference, sir)
        models = _stage(sir, "estimate", timings, est.fit_trials, data, cfg.model_order,
                        cfg.estimator, cfg.em)
        model = est.average_models(models)
        pdc = _stage(sir, "pdc", timings, pdc_from_models, models, cfg.n_freqs)
        thresholds, masks = {}, {}
        for method in methods:
            if method is sig.ThresholdMethod.SURROGATE:
                curve = _stage(sir, "surrogate", timings, sig.surrogate_threshold, data, scfg)
            else:
                ctrl = data.replace(control.data * gain[:, None, None])
                ctrl_models = _stage(sir, "permutation", timings, est.fit_trials, ctrl,
                                     cfg.model_order, cfg.estimator, cfg.em)
                curve = _stage(sir, "permutation", timings, sig.permutation_threshold,
                               models, ctrl_models, scfg)
            thresholds[method] = curve
            masks[method] = sig.apply_threshold(pdc, curve)
        records.append(SirRecord(sir, model, pdc, thresholds, masks,
                                 time.perf_counter() - t_start, timings))
    result = ExperimentResult(cfg, records)
    if cfg.output_dir:
        emit_outputs(result, cfg.output_dir)
    return result


def _diagnostics_dict(model: est.MvarModel):
    return [dataclasses.asdict(d) for d in model.diagnostics]


def run_metadata(result: ExperimentResult, manifest) -> dict:
    cfg = result.config
    meta = {
        "format_version": FORMAT_VERSION,
        "library": "mvarpdc",
        "version": __version__,
        "backend": _backend.BACKEND,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "conventions": {
            "sir": SIR_CONVENTION,
            "control": CONTROL_CONVENTION,
            "frequency": "cycles/sample, 0.5 = Nyquist, endpoints included",
            "pdc": "trial-averaged (coefficients averaged before the spectral transform)",
            "max_statistic": f"{cfg.strategy.value}/{cfg.scope.value}",
        },
        "diagnostics": {sir_label(r.sir): _diagnostics_dict(r.model) for r in result.records},
        "manifest": list(manifest),
    }
    if cfg.record_timings:
        meta["timings"] = {
            sir_label(r.sir): {"wall_clock": r.wall_clock, **r.timings} for r in result.records
        }
    return meta


def emit_outputs(result: ExperimentResult, out_dir) -> list:
    """Write every artifact of ``result`` into ``out_dir``; returns the file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for r in result.records:
        lab = sir_label(r.sir)
        name = f"pdc_{lab}.csv"
        mio.write_direction_table(out / name, r.pdc.freqs, r.pdc.psi)
        manifest.append(name)
        for method, curve in r.thresholds.items():
            name = f"threshold_{method.value}_{lab}.csv"
            mio.write_direction_table(out / name, curve.freqs, curve.threshold)
            manifest.append(name)
            name = f"mask_{method.value}_{lab}.csv"
            mio.write_direction_table(out / name, curve.freqs, r.masks[method], as_int=True)
            manifest.append(name)
        name = f"coeffs_{lab}.csv"
        mio.write_coeffs(out / name, r.model.coeffs)
        manifest.append(name)
    manifest.append("run.json")
    meta = run_metadata(result, manifest)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return manifest


def load_run_config(path, **overrides) -> ExperimentConfig:
    meta = json.loads(Path(path).read_text())
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported run.json format_version {version!r}")
    return ExperimentConfig.from_dict(meta["config"], **overrides)


def standard_configs(seed, **common):
    """The four (scenario, estimator) experiments, each over the default SIR sweep."""
    out = {}
    for scenario in sg.Scenario:
        for method in est.Method:
            out[f"{scenario.value}_{method.value}"] = ExperimentConfig(
                scenario=scenario, estimator=method, seed=seed, **common)
    return out
