import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvarpdc import signalgen as sg
from mvarpdc.errors import ConfigError, DimensionMismatch, NonStationaryModel
from mvarpdc.io import save_timeseries_csv


def test_interacting_generator_is_stable():
    assert sg.companion_radius(sg.INTERACTING_COEFFS) < 1.0


def test_interacting_coeffs_read_only():
    with pytest.raises(ValueError):
        sg.INTERACTING_COEFFS[0, 0, 0] = 1.0


def test_nonstationary_rejected():
    with pytest.raises(NonStationaryModel):
        sg.simulate_mvar(np.array([[[1.01]]]), 1, 10, seed=0)


def test_simulated_covariance_matches_lyapunov():
    data = sg.simulate_mvar(sg.INTERACTING_COEFFS, 20, 2000, seed=1)
    emp = np.mean([np.cov(trial) for trial in data], axis=0)
    theory = sg.stationary_covariance(sg.INTERACTING_COEFFS)
    assert np.max(np.abs(emp - theory) / np.max(np.abs(theory))) < 0.1


def test_trials_do_not_depend_on_trial_count():
    few = sg.generate(sg.ScenarioConfig(n_trials=2, n_samples=50, seed=4))
    many = sg.generate(sg.ScenarioConfig(n_trials=5, n_samples=50, seed=4))
    np.testing.assert_array_equal(few.data, many.data[:2])


def test_seed_changes_output():
    a = sg.generate(sg.ScenarioConfig(n_trials=1, n_samples=50, seed=1))
    b = sg.generate(sg.ScenarioConfig(n_trials=1, n_samples=50, seed=2))
    assert not np.array_equal(a.data, b.data)


def test_noninteracting_channels_unit_variance_and_lowpassed():
    d = sg.generate(sg.ScenarioConfig(scenario="noninteracting", n_trials=4, n_samples=1024, seed=0))
    np.testing.assert_allclose(d.data.std(axis=2), 1.0, rtol=1e-12)
    power = np.mean(np.abs(np.fft.rfft(d.data, axis=2)) ** 2, axis=(0, 1))
    f = np.fft.rfftfreq(1024)
    # every cutoff is <= 0.3, so the top band carries almost nothing
    assert power[f > 0.35].sum() < 1e-3 * power.sum()


@pytest.mark.parametrize("bad", [dict(n_trials=0), dict(sir=0.0), dict(sir=-1.0), dict(burn_in=-1),
                                 dict(cutoffs=(0.1, 0.2)), dict(cutoffs=(0.1, 0.2, 0.6))])
def test_scenario_config_validation(bad):
    with pytest.raises(ConfigError):
        sg.ScenarioConfig(**bad)


@pytest.mark.parametrize("text,expected", [("ar1", sg.Ar1Colored()), ("ar1:0.5", sg.Ar1Colored(0.5)),
                                           ("1/f", sg.OneOverF()), ("file:x.csv", sg.FromFile("x.csv"))])
def test_parse_interference(text, expected):
    assert sg.parse_interference(text) == expected
    assert sg.parse_interference(expected.to_string()) == expected


@pytest.mark.parametrize("text", ["ar1:1.5", "ar1:abc", "brown"])
def test_parse_interference_rejects(text):
    with pytest.raises(ConfigError):
        sg.parse_interference(text)


@pytest.mark.parametrize("kind", [sg.Ar1Colored(0.95), sg.OneOverF()])
def test_interference_is_standardized(kind):
    x = sg.make_interference(kind, 3, 2, 500, seed=0)
    np.testing.assert_allclose(x.data.std(axis=2), 1.0, rtol=1e-12)


def test_ar1_interference_lag_one_correlation():
    x = sg.make_interference(sg.Ar1Colored(0.9), 20, 3, 2000, seed=0).data
    r = np.mean([np.corrcoef(ch[:-1], ch[1:])[0, 1] for trial in x for ch in trial])
    assert abs(r - 0.9) < 0.02


def test_interference_from_file(tmp_path):
    data = np.random.default_rng(0).standard_normal((2, 3, 40))
    path = tmp_path / "noise.csv"
    save_timeseries_csv(data, path)
    x = sg.make_interference(sg.FromFile(str(path)), 2, 3, 40, seed=0)
    np.testing.assert_allclose(x.data, data / data.std(axis=2, keepdims=True))


def test_interference_file_wrong_channels(tmp_path):
    path = tmp_path / "noise.csv"
    save_timeseries_csv(np.ones((1, 2, 10)) + np.arange(10), path)
    with pytest.raises(DimensionMismatch):
        sg.make_interference(sg.FromFile(str(path)), 1, 3, 10, seed=0)


@settings(max_examples=30)
@given(sir=st.floats(0.05, 20.0), seed=st.integers(0, 1000))
def test_mix_hits_requested_sir(sir, seed):
    s = sg.generate(sg.ScenarioConfig(n_trials=3, n_samples=100, seed=seed))
    i = sg.make_interference(sg.Ar1Colored(), 3, 3, 100, seed)
    mixed = sg.mix_at_sir(s, i, sir)
    np.testing.assert_allclose(sg.rms_ratio(s, mixed), sir, rtol=1e-10)


def test_infinite_sir_is_clean():
    s = sg.generate(sg.ScenarioConfig(n_trials=2, n_samples=50))
    i = sg.make_interference(sg.Ar1Colored(), 2, 3, 50, 0)
    np.testing.assert_array_equal(sg.mix_at_sir(s, i, math.inf).data, s.data)


def test_mix_shape_mismatch():
    s = sg.generate(sg.ScenarioConfig(n_trials=2, n_samples=50))
    i = sg.make_interference(sg.Ar1Colored(), 2, 3, 60, 0)
    with pytest.raises(DimensionMismatch):
        sg.mix_at_sir(s, i, 1.0)


def test_trialset_is_immutable_copy():
    raw = np.zeros((1, 2, 3))
    ts = sg.TrialSet(raw)
    raw[0, 0, 0] = 5.0
    assert ts.data[0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        ts.data[0, 0, 0] = 1.0


def test_trialset_rejects_nan():
    with pytest.raises(ValueError):
        sg.TrialSet(np.full((1, 1, 2), np.nan))
