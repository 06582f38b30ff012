import numpy as np
import pytest
from hypothesis import given, strategies as st

from schoolsim.calibration import EtaCalibrationSpec, calibrate_eta, mean_sensitivity, presymptomatic_cross_section
from schoolsim.disease import DiseaseParams, sample_trajectory
from schoolsim.population import ConfigurationError
from schoolsim.state import PupilState
from schoolsim.testing import (DEFAULT_BETA_TEST, DEFAULT_C_TEST, LFD, PCR, ComplianceParams, LfdModelParams,
                               PcrModelParams, TestHistory, TestRecord, lfd_positive_probability, lfd_sensitivity,
                               lfd_test, pcr_test, sample_compliance)


def test_defaults():
    lfd = LfdModelParams()
    assert (lfd.specificity, lfd.a, lfd.ar_window, lfd.beta_u) == (0.998, 0.0, 3, 0.0)
    pcr = PcrModelParams()
    assert (pcr.sensitivity_above_lod, pcr.lod, pcr.specificity, pcr.turnaround_days) == (0.975, 300.0, 1.0, 2)
    assert ComplianceParams(enabled=True).mean == pytest.approx(2 / 3)
    # placeholder curve: 0.82 at 1e7 copies/ml without scaling
    assert lfd_sensitivity(lfd, 1e7) == pytest.approx(0.82)


@pytest.mark.parametrize("kw", [dict(a=1.5), dict(eta=0), dict(beta_test=0), dict(specificity=2)])
def test_invalid_lfd(kw):
    with pytest.raises(ConfigurationError):
        LfdModelParams(**kw)


def test_half_at_logit_zero():
    lfd = LfdModelParams(beta_test=2.0, c_test=-10.0)
    assert lfd_sensitivity(lfd, 1e5) == pytest.approx(0.5)


def test_random_effect_increases_sensitivity():
    lfd = LfdModelParams(beta_u=0.5)
    assert lfd_sensitivity(lfd, 1e6, u=1.0) > lfd_sensitivity(lfd, 1e6, u=0.0)


def test_sensitivity_rejects_zero_vl():
    with pytest.raises(ValueError):
        lfd_sensitivity(LfdModelParams(), 0.0)


@given(st.floats(0.1, 14), st.floats(0.1, 14), st.floats(0.05, 5), st.floats(0.05, 5), st.floats(-3, 3))
def test_sensitivity_monotone(l1, l2, e1, e2, u):
    lo_l, hi_l = sorted((l1, l2))
    lo_e, hi_e = sorted((e1, e2))
    f = lambda l, e, uu: lfd_sensitivity(LfdModelParams(eta=e, beta_u=0.7), 10 ** l, uu)
    assert f(lo_l, hi_e, u) <= f(hi_l, hi_e, u)
    assert f(hi_l, lo_e, u) <= f(hi_l, hi_e, u)
    assert f(hi_l, hi_e, u) <= f(hi_l, hi_e, u + 0.5)
    assert 0.0 < f(hi_l, hi_e, u) < 1.0 or np.isclose(f(hi_l, hi_e, u), 1.0)


def test_autocorrelation_cap():
    lfd = LfdModelParams(a=0.75, c_test=50.0)  # g ~ 1
    p = lfd_positive_probability(lfd, 8.0, 0.0, 0.0)
    assert p == pytest.approx(0.25)


def test_autocorrelation_off_is_plain_curve():
    lfd = LfdModelParams(a=0.0)
    g = lfd_sensitivity(lfd, 1e8)
    for last in (np.nan, 0.0, 1.0):
        assert lfd_positive_probability(lfd, 8.0, 0.0, last) == pytest.approx(g)


@given(st.floats(0.0, 14.0), st.floats(0, 1))
def test_no_window_result_means_identical_characteristics(log10_vl, a):
    p0 = lfd_positive_probability(LfdModelParams(a=0.0), log10_vl, 0.0, np.nan)
    p1 = lfd_positive_probability(LfdModelParams(a=a), log10_vl, 0.0, np.nan)
    assert p0 == p1


def test_false_positive_rate(rng):
    p = lfd_positive_probability(LfdModelParams(), np.full(100_000, -np.inf), 0.0, np.full(100_000, np.nan))
    freq = (rng.random(100_000) < p).mean()
    assert 0.001 <= freq <= 0.003


def test_lfd_test_records_history(rng):
    tr = sample_trajectory(DiseaseParams(), 0, rng)
    pupil = PupilState(pupil=0, trajectory=tr, infection_day=0)
    lfd_test(LfdModelParams(), pupil, 5, rng)
    lfd_test(LfdModelParams(), pupil, 6, rng)
    assert [r.day for r in pupil.test_history.records] == [5, 6]
    assert all(r.kind == LFD for r in pupil.test_history.records)


def test_lfd_test_uses_window(rng):
    # a = 1 copies the last in-window result exactly
    lfd = LfdModelParams(a=1.0)
    tr = sample_trajectory(DiseaseParams(), 0, rng)
    results = []
    for _ in range(50):
        pupil = PupilState(0, tr, 0, test_history=TestHistory([TestRecord(3, LFD, False)]))
        results.append(lfd_test(lfd, pupil, 5, rng))
    assert not any(results)


def test_history_append_only():
    h = TestHistory()
    h.append(TestRecord(3, LFD, True))
    with pytest.raises(ValueError):
        h.append(TestRecord(2, PCR, False))
    assert h.last_lfd_in_window(5, 3) is True
    assert h.last_lfd_in_window(7, 3) is None
    assert h.last_lfd_in_window(3, 3) is None


def test_pcr(rng):
    assert not any(pcr_test(PcrModelParams(), 0.0, rng).positive for _ in range(1000))
    assert not any(pcr_test(PcrModelParams(), 299.0, rng).positive for _ in range(1000))
    freq = np.mean([pcr_test(PcrModelParams(), 1e6, rng).positive for _ in range(10_000)])
    assert 0.97 <= freq <= 0.98
    assert pcr_test(PcrModelParams(), 1e6, rng, swab_day=7).available_day == 9


def test_compliance(rng):
    assert np.all(sample_compliance(ComplianceParams(), rng, 50) == 1.0)
    draws = sample_compliance(ComplianceParams(enabled=True), rng, 100_000)
    assert 0.66 <= draws.mean() <= 0.68
    middle = np.mean((draws > 0.4) & (draws < 0.6))
    tails = np.mean((draws < 0.2) | (draws > 0.8))
    assert middle < tails


def test_eta_scaled_mean_sensitivity():
    lfd = LfdModelParams()
    eta = calibrate_eta(EtaCalibrationSpec(target_x=0.6, n_trajectories=50_000, seed=3), lfd)
    sample = presymptomatic_cross_section(DiseaseParams(), 50_000, np.random.default_rng(99))
    assert 0.59 <= mean_sensitivity(sample, lfd, eta) <= 0.61


def test_placeholder_constants():
    assert DEFAULT_BETA_TEST == 1.0
    assert DEFAULT_C_TEST == pytest.approx(np.log(0.82 / 0.18) - 7.0)
