"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

from . import __version__
from . import estimation as est
from . import experiment as exp
from . import io as mio
from . import signalgen as sg
from . import significance as sig
from .errors import (
    ConfigError, DimensionMismatch, FileFormatError, IllConditioned, InsufficientSamples,
    NonStationaryModel, NumericalBreakdown, OddTrialCount, ShapeMismatch,
)
from .pdc import DEFAULT_N_FREQS, pdc_from_models

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, DimensionMismatch, ShapeMismatch, OddTrialCount)
_NUMERICAL_ERRORS = (IllConditioned, NumericalBreakdown, NonStationaryModel, InsufficientSamples,
                     ArithmeticError)
_IO_ERRORS = (FileFormatError, OSError)


def exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, exp.StageError) else exc
    if isinstance(cause, _IO_ERRORS):
        return EXIT_IO
    if isinstance(cause, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(cause, _NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def _sir(text):
    try:
        return math.inf if text.lower() in ("inf", "infinity") else float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _floats(text):
    try:
        return tuple(_sir(t) for t in text.split(",") if t.strip())
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_scenario(p, with_sir=True):
    p.add_argument("--scenario", default="interacting", choices=[s.value for s in sg.Scenario])
    p.add_argument("--n-trials", type=int, default=40)
    p.add_argument("--n-samples", type=int, default=600)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--cutoffs", type=_floats, default=sg.DEFAULT_CUTOFFS,
                   help="three low-pass cutoffs in cycles/sample (non-interacting scenario)")
    p.add_argument("--interference", default="ar1:0.95", help="ar1[:rho], 1/f or file:<path>")
    if with_sir:
        p.add_argument("--sir", type=_sir, default=math.inf)


def _add_estimator(p):
    p.add_argument("--estimator", default="ls", choices=[m.value for m in est.Method])
    p.add_argument("--model-order", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--prune-threshold", type=float, default=1e12)
    p.add_argument("--nu-init", type=float, default=1.0)
    p.add_argument("--lambda-init", default="isotropic", choices=["isotropic", "unit"])
    p.add_argument("--noise", default="isotropic", choices=["isotropic", "diagonal"])


def _add_threshold_opts(p):
    p.add_argument("--n-boot", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--scope", default="per_direction", choices=[s.value for s in sig.Scope])
    p.add_argument("--strategy", default="literal", choices=[s.value for s in sig.Strategy])
    p.add_argument("--n-freqs", type=int, default=DEFAULT_N_FREQS)
    p.add_argument("--jobs", type=int, default=1)


def _add_experiment(p, seed_required):
    _add_scenario(p, with_sir=False)
    _add_estimator(p)
    _add_threshold_opts(p)
    p.add_argument("--sir-sweep", type=_floats, default=exp.DEFAULT_SIR_SWEEP)
    p.add_argument("--thresholding", default="both", choices=[t.value for t in exp.Thresholding])
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--record-timings", action="store_true",
                   help="store wall-clock timings in run.json (makes it non-reproducible)")


def _em(a) -> est.EmConfig:
    return est.EmConfig(max_iters=a.max_iters, rel_tol=a.rel_tol, prune_threshold=a.prune_threshold,
                        nu_init=a.nu_init, lambda_init=a.lambda_init, noise=a.noise)


def _experiment_kwargs(a) -> dict:
    return dict(
        n_trials=a.n_trials, n_samples=a.n_samples, burn_in=a.burn_in, cutoffs=a.cutoffs,
        interference=a.interference, em=_em(a), model_order=a.model_order,
        sir_sweep=a.sir_sweep, thresholding=a.thresholding, n_boot=a.n_boot, alpha=a.alpha,
        scope=a.scope, strategy=a.strategy, n_freqs=a.n_freqs, seed=a.seed, jobs=a.jobs,
        record_timings=a.record_timings,
    )


def _surrogate_cfg(a) -> sig.SurrogateConfig:
    return sig.SurrogateConfig(n_boot=a.n_boot, alpha=a.alpha, seed=a.seed, estimator=a.estimator,
                               em=_em(a), scope=a.scope, strategy=a.strategy,
                               order=a.model_order, n_freqs=a.n_freqs, jobs=a.jobs)


def cmd_simulate(a):
    cfg = sg.ScenarioConfig(scenario=a.scenario, n_trials=a.n_trials, n_samples=a.n_samples,
                            sir=a.sir, interference=sg.parse_interference(a.interference),
                            burn_in=a.burn_in, cutoffs=a.cutoffs, seed=a.seed)
    data = sg.generate(cfg)
    if not math.isinf(cfg.sir):
        noise = sg.make_interference(cfg.interference, data.n_trials, data.n_channels,
                                     data.n_samples, cfg.seed)
        data = sg.mix_at_sir(data, noise, cfg.sir)
    mio.save_timeseries_csv(data, a.output)


def cmd_estimate(a):
    trials = mio.load_timeseries_csv(a.input)
    models = est.fit_trials(trials, a.model_order, a.estimator, _em(a))
    mio.write_coeffs(a.output, est.average_models(models).coeffs)


def cmd_pdc(a):
    if (a.coeffs is None) == (a.input is None):
        raise ConfigError("give exactly one of --coeffs or --input")
    if a.coeffs is not None:
        models = [mio.read_coeffs(a.coeffs)]
    else:
        models = est.fit_trials(mio.load_timeseries_csv(a.input), a.model_order, a.estimator, _em(a))
    spec = pdc_from_models(models, a.n_freqs)
    mio.write_direction_table(a.output, spec.freqs, spec.psi)


def cmd_threshold(a):
    trials = mio.load_timeseries_csv(a.input)
    cfg = _surrogate_cfg(a)
    models = est.fit_trials(trials, cfg.order, cfg.estimator, cfg.em)
    if a.method == sig.ThresholdMethod.SURROGATE.value:
        curve = sig.surrogate_threshold(trials, cfg)
    else:
        if a.control is None:
            raise ConfigError("permutation thresholding needs --control")
        ctrl = est.fit_trials(mio.load_timeseries_csv(a.control), cfg.order, cfg.estimator, cfg.em)
        curve = sig.permutation_threshold(models, ctrl, cfg)
    mio.write_direction_table(a.output, curve.freqs, curve.threshold)
    if a.mask_output:
        mask = sig.apply_threshold(pdc_from_models(models, cfg.n_freqs), curve)
        mio.write_direction_table(a.mask_output, curve.freqs, mask, as_int=True)


def cmd_run(a):
    cfg = exp.ExperimentConfig(scenario=a.scenario, estimator=a.estimator,
                               output_dir=a.output_dir, **_experiment_kwargs(a))
    exp.run_experiment(cfg)


def cmd_run_all(a):
    kw = _experiment_kwargs(a)
    out = Path(a.output_dir)
    for name, cfg in exp.standard_configs(**kw).items():
        print(f"running {name}", file=sys.stderr)
        res = exp.run_experiment(cfg)
        exp.emit_outputs(res, out / name)


def cmd_replay(a):
    meta_path = Path(a.run_json)
    overrides = {"jobs": a.jobs}
    cfg = exp.load_run_config(meta_path, **overrides)
    out = a.output_dir if a.output_dir is not None else meta_path.parent
    exp.emit_outputs(exp.run_experiment(cfg), out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvarpdc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mvarpdc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate scenario trials (optionally mixed with interference)")
    _add_scenario(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit per-trial MVAR models and write the averaged coefficients")
    p.add_argument("--input", required=True)
    _add_estimator(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pdc", help="trial-averaged PDC from coefficients or time series")
    p.add_argument("--coeffs")
    p.add_argument("--input")
    _add_estimator(p)
    p.add_argument("--n-freqs", type=int, default=DEFAULT_N_FREQS)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_pdc)

    p = sub.add_parser("threshold", help="surrogate or permutation significance threshold")
    p.add_argument("--input", required=True)
    p.add_argument("--control", help="control-period time series (permutation method)")
    p.add_argument("--method", default="surrogate", choices=[m.value for m in sig.ThresholdMethod])
    _add_estimator(p)
    _add_threshold_opts(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--mask-output")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("run", help="one experiment over a SIR sweep")
    _add_experiment(p, seed_required=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("run-paper", help="all four scenario/estimator experiments")
    _add_experiment(p, seed_required=True)
    for flag in ("--scenario", "--estimator"):
        p._option_string_actions[flag].help = argparse.SUPPRESS
    p.set_defaults(func=cmd_run_all)

    p = sub.add_parser("replay", help="re-run an experiment from its run.json")
    p.add_argument("run_json")
    p.add_argument("--output-dir")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    warnings.simplefilter("default")
    try:
        args.func(args)
    except (exp.StageError, *_CONFIG_ERRORS, *_NUMERICAL_ERRORS, *_IO_ERRORS,
            ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"mvarpdc: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK
