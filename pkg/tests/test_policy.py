import numpy as np
import pytest

from helpers import quiet_run, run_days, seed_case
from schoolsim.engine import Run, ScenarioConfig
from schoolsim.policy import (ALL_POLICIES, PolicyKind, PolicySpec, is_open, is_standard_school_day, weekday)
from schoolsim.population import ConfigurationError
from schoolsim.state import ATTENDING, ISOLATED
from schoolsim.testing import lfd_positive_probability, lfd_sensitivity_log10
from schoolsim.transmission import InfectivityParams

REF = PolicyKind.REFERENCE
MON = 0


def isolated_days(run, pupil, days):
    out = []
    for d in days:
        run.run_day(d)
        if run.state.isolated(d)[pupil]:
            out.append(d)
    return out


def test_policy_parsing():
    assert PolicyKind.parse("TFR") is PolicyKind.TEST_FOR_RELEASE
    assert PolicyKind.parse("Mon-Wed") is PolicyKind.MON_WED_SCREENING
    with pytest.raises(ConfigurationError):
        PolicyKind.parse("lockdown")
    assert len(ALL_POLICIES) == 5


def test_policy_defaults():
    spec = PolicySpec()
    assert (spec.isolation_days, spec.negative_release_days, spec.tfr_followup_schooldays) == (10, 2, 7)


def test_calendar():
    assert weekday(0) == MON and is_standard_school_day(4) and not is_standard_school_day(5)
    ew = PolicySpec(kind=PolicyKind.EXTENDED_WEEKEND)
    assert [is_open(ew, d) for d in range(7)] == [True, True, True, False, False, False, False]


def test_quiet_reference_unchanged():
    run = quiet_run(REF)
    run_days(run, range(14))
    st = run.state
    assert not st.isolated(13).any() and st.pcr_count.sum() == 0 and st.lfd_count.sum() == 0
    assert st.days_missed.sum() == 0


def test_symptomatic_negative_pcr_returns_after_two_days():
    run = quiet_run(REF, pcr_positive=False)
    seed_case(run, 0, 0, onset_offset=2)  # symptoms on day 2 (Wednesday)
    assert isolated_days(run, 0, range(8)) == [2, 3]
    assert run.state.pcr_count[0] == 1
    # bubble never isolated after a negative index
    assert not run.state.isolated(3)[1]


def test_positive_index_isolates_bubble_for_remaining_days():
    run = quiet_run(REF)
    seed_case(run, 0, 0, onset_offset=1)  # swab day 1
    mate = 1
    iso_index = isolated_days(run, 0, range(20))
    assert iso_index == list(range(1, 11))
    run = quiet_run(REF)
    seed_case(run, 0, 0, onset_offset=1)
    assert isolated_days(run, mate, range(20)) == list(range(3, 11))
    assert run.state.isolation_state(mate, 5).release_day == 11
    # other bubbles untouched
    assert not run.state.isolated(5)[9]


def test_second_positive_resets_bubble_clock():
    run = quiet_run(REF)
    seed_case(run, 0, 0, onset_offset=1)  # swab d = 1
    seed_case(run, 1, 0, onset_offset=5)  # swab d + 4 = 5 while bubble isolating
    iso = isolated_days(run, 2, range(25))
    assert iso == list(range(3, 15))


def test_simultaneous_indices_single_isolation():
    run = quiet_run(REF)
    seed_case(run, 0, 0, onset_offset=2)
    seed_case(run, 1, 0, onset_offset=2)
    run_days(run, range(6))
    st = run.state
    members = run.layout.bubble_members(0)
    assert st.bubble_release[0] == 12
    assert {st.isolation_state(int(p), 5).release_day for p in members} == {12}


def test_extended_weekend_missed_fraction():
    res = quiet_run(PolicyKind.EXTENDED_WEEKEND).run()
    assert res.proportion_schooldays_missed == pytest.approx(12 / 30)


def test_extended_weekend_no_contacts_thu_fri():
    cfg = ScenarioConfig(policy=PolicySpec(kind=PolicyKind.EXTENDED_WEEKEND), infectivity=InfectivityParams(0.05))
    run = Run(cfg, 0)
    for d in range(7):
        run.run_day(d)
        assert (run.contacts_today > 0) == (d in (0, 1, 2))


def test_extended_weekend_thursday_symptoms():
    run = quiet_run(PolicyKind.EXTENDED_WEEKEND, pcr_positive=False)
    seed_case(run, 0, 0, onset_offset=3)
    run_days(run, range(4))
    assert run.state.isolated(3)[0] and run.state.pcr_count[0] == 1
    assert run.state.histories[0].records[0].day == 3


def test_screening_all_negative():
    run = quiet_run(PolicyKind.MONDAY_SCREENING)
    run_days(run, range(8))
    assert run.state.lfd_count.sum() == 2 * 324
    assert not run.state.isolated(7).any()


def test_screening_positive_negative_pcr_bubble_back_wednesday():
    run = quiet_run(PolicyKind.MONDAY_SCREENING, pcr_positive=False)
    seed_case(run, 0, 4)  # asymptomatic, infectious by Monday day 7
    assert isolated_days(run, 1, range(12)) == [7, 8]
    run2 = quiet_run(PolicyKind.MONDAY_SCREENING, pcr_positive=False)
    seed_case(run2, 0, 4)
    assert isolated_days(run2, 0, range(12)) == [7, 8]


def test_screening_positive_confirmed_bubble_ten_days():
    run = quiet_run(PolicyKind.MONDAY_SCREENING)
    seed_case(run, 0, 4)
    assert isolated_days(run, 1, range(21)) == list(range(7, 17))


def test_screening_skips_isolated_pupils():
    run = quiet_run(PolicyKind.MONDAY_SCREENING)
    seed_case(run, 0, 4, onset_offset=2)  # symptomatic Saturday, confirmed Monday morning
    run_days(run, range(15))
    # day 7: only the index (pending PCR) is skipped; day 14: the confirmed bubble is held
    assert run.state.lfd_count.sum() == 324 + 315 + 323


def test_monwed_wednesday_retest_autocorrelated():
    run = quiet_run(PolicyKind.MON_WED_SCREENING, lfd_c=-12.0, a=0.75)
    seed_case(run, 0, 4)
    st = run.state
    run_days(run, range(9))
    g = lfd_sensitivity_log10(st.lfd, 8.0)
    if st.confirmed[0] or st.pending[0]:
        pytest.skip("Monday test happened to be positive")
    last = st.last_lfd_in_window(np.array([0]), 9)
    assert last[0] == 0.0
    assert lfd_positive_probability(st.lfd, 8.0, 0.0, last[0]) == pytest.approx(0.25 * g)


def test_monday_only_never_autocorrelated():
    run = quiet_run(PolicyKind.MONDAY_SCREENING, lfd_c=-8.0, a=0.75)
    run_days(run, range(8))
    assert np.all(np.isnan(run.state.last_lfd_in_window(np.arange(324), 7)))


def test_tfr_negative_index_stops_followup():
    run = quiet_run(PolicyKind.TEST_FOR_RELEASE, pcr_positive=False, lfd_c=-50.0)
    seed_case(run, 0, 0, onset_offset=1)  # trigger Tuesday day 1
    run_days(run, range(14))
    lfd_days = sorted({r.day for r in run.state.histories[1].records})
    assert lfd_days == [1, 2]


def test_tfr_friday_trigger_spans_weekend():
    run = quiet_run(PolicyKind.TEST_FOR_RELEASE, lfd_c=-50.0)
    seed_case(run, 0, 0, onset_offset=4)  # Friday trigger, PCR positive
    run_days(run, range(21))
    lfd_days = [r.day for r in run.state.histories[1].records]
    assert len(lfd_days) == 7
    assert lfd_days == [4, 7, 8, 9, 10, 11, 14]


def test_tfr_overlapping_followups_merge():
    run = quiet_run(PolicyKind.TEST_FOR_RELEASE, lfd_c=-50.0)
    seed_case(run, 0, 0, onset_offset=1)
    seed_case(run, 1, 0, onset_offset=2)
    run_days(run, range(21))
    days = [r.day for r in run.state.histories[2].records]
    assert len(days) == len(set(days))
    assert days == [1, 2, 3, 4, 7, 8, 9, 10]


def test_tfr_never_isolates_bubble():
    cfg = ScenarioConfig(policy=PolicySpec(kind=PolicyKind.TEST_FOR_RELEASE), infectivity=InfectivityParams(0.05))
    for rep in range(5):
        run = Run(cfg, rep)
        for d in range(42):
            run.run_day(d)
            st = run.state
            assert not st.gates_bubble.any() and not (st.bubble_release > d).any()
            iso = np.flatnonzero(st.isolated(d))
            assert all(st.isolation_state(int(p), d).cause in ("symptom", "lfd_positive") for p in iso)


def test_isolation_state_view():
    run = quiet_run(REF)
    seed_case(run, 0, 0, onset_offset=1)
    run_days(run, range(2))
    s = run.state.isolation_state(0, 1)
    assert s.status == ISOLATED and s.cause == "symptom" and s.release_day == 3
    assert run.state.isolation_state(5, 1).status == ATTENDING


@pytest.mark.parametrize("kind", ALL_POLICIES)
def test_invariants_across_policies(kind):
    cfg = ScenarioConfig(policy=PolicySpec(kind=kind), infectivity=InfectivityParams(0.05), replications=4)
    for rep in range(4):
        run = Run(cfg, rep)
        ever = 0
        for d in range(42):
            run.run_day(d)
            st = run.state
            n_inf = int(st.infected.sum())
            assert n_inf >= ever
            ever = n_inf
            if kind is not PolicyKind.TEST_FOR_RELEASE:
                iso = st.isolated(d)
                held = st.bubble_held(d)
                for b in np.flatnonzero(held):
                    assert iso[run.layout.bubble_of == b].all()
        assert np.all(st.days_missed + st.days_attended == 30)
        assert not st.pending_pcrs or all(p.available_day > 41 for p in st.pending_pcrs)
