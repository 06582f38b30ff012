"""Test-and-isolate policies, executed once per morning before pupils meet.

Order of the morning step: PCR results due today, symptom check, policy LFD
testing (open school days only). Isolation itself is derived state: a pupil is
isolated while they await their own PCR, until their own release day, or while
their bubble is held (pending index PCR or until the bubble release day).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .population import ConfigurationError
from .state import LFD_POSITIVE, SYMPTOM, SchoolState, TfrFollowup
from .testing import lfd_positive_probability

MONDAY, WEDNESDAY, THURSDAY, FRIDAY = 0, 2, 3, 4


class PolicyKind(str, Enum):
    REFERENCE = "reference"
    EXTENDED_WEEKEND = "extended_weekend"
    MONDAY_SCREENING = "monday_screening"
    MON_WED_SCREENING = "mon_wed_screening"
    TEST_FOR_RELEASE = "test_for_release"

    @classmethod
    def parse(cls, value) -> "PolicyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "extendedweekend": "extended_weekend", "mondayscreening": "monday_screening",
            "monday": "monday_screening", "monwedscreening": "mon_wed_screening",
            "mon_wed": "mon_wed_screening", "monwed": "mon_wed_screening",
            "testforrelease": "test_for_release", "tfr": "test_for_release",
        }
        key = aliases.get(key.replace("_", ""), aliases.get(key, key))
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigurationError(f"unknown policy {value!r}; expected one of: {names}") from None


ALL_POLICIES = tuple(PolicyKind)


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind = PolicyKind.REFERENCE
    isolation_days: int = 10
    negative_release_days: int = 2
    tfr_followup_schooldays: int = 7
    # whether Covid-like symptoms from other causes also start a test-for-release follow-up
    followup_on_noncovid_symptoms: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind.parse(self.kind))
        if self.isolation_days < 1 or self.negative_release_days < 0 or self.tfr_followup_schooldays < 1:
            raise ConfigurationError("policy timing constants must be positive")

    @property
    def screening_weekdays(self) -> tuple:
        if self.kind is PolicyKind.MONDAY_SCREENING:
            return (MONDAY,)
        if self.kind is PolicyKind.MON_WED_SCREENING:
            return (MONDAY, WEDNESDAY)
        return ()

    @property
    def bubble_isolation(self) -> bool:
        return self.kind is not PolicyKind.TEST_FOR_RELEASE


def weekday(day: int) -> int:
    """Day 0 is a Monday."""
    return day % 7


def is_standard_school_day(day: int) -> bool:
    return weekday(day) < 5


def is_open(spec: PolicySpec, day: int) -> bool:
    if not is_standard_school_day(day):
        return False
    if spec.kind is PolicyKind.EXTENDED_WEEKEND and weekday(day) in (THURSDAY, FRIDAY):
        return False
    return True


class PolicyStreams(NamedTuple):
    symptoms: np.random.Generator
    lfd: np.random.Generator
    pcr: np.random.Generator
    compliance: np.random.Generator


def resolve_pcr_results(spec: PolicySpec, day: int, state: SchoolState) -> None:
    due = [p for p in state.pending_pcrs if p.available_day <= day]
    if not due:
        return
    state.pending_pcrs = [p for p in state.pending_pcrs if p.available_day > day]
    for pcr in due:
        pupil = pcr.pupil
        state.pending[pupil] = False
        state.gates_bubble[pupil] = False
        if pcr.positive:
            release = pcr.swab_day + spec.isolation_days
            state.confirmed[pupil] = True
            state.own_release[pupil] = max(state.own_release[pupil], release)
            if spec.bubble_isolation:
                b = state.layout.bubble_of[pupil]
                state.bubble_release[b] = max(state.bubble_release[b], release)
        else:
            # release at swab + negative_release_days; with the default turnaround this is today
            state.own_release[pupil] = max(state.own_release[pupil], pcr.swab_day + spec.negative_release_days)
            for f in state.followups:
                if f.active and f.index_pupil == pupil:
                    f.active = False


def _start_followup(spec: PolicySpec, state: SchoolState, pupil: int, day: int) -> None:
    b = int(state.layout.bubble_of[pupil])
    state.followups.append(TfrFollowup(b, pupil, day, spec.tfr_followup_schooldays))


def _new_case(spec: PolicySpec, state: SchoolState, pupil: int, day: int, cause: int, rng,
              followup: bool = True) -> None:
    """Isolate ``pupil`` pending a PCR swabbed today; screening positives hold the bubble too."""
    state.isolate_pending(pupil, cause)
    scope = "bubble" if (cause == LFD_POSITIVE and spec.screening_weekdays) else "individual"
    state.swab_pcr(pupil, day, rng, scope)
    if followup and spec.kind is PolicyKind.TEST_FOR_RELEASE:
        _start_followup(spec, state, pupil, day)


def symptom_check(spec: PolicySpec, day: int, state: SchoolState, rngs: PolicyStreams) -> np.ndarray:
    noise = rngs.symptoms.random(state.n_pupils) < state.disease.noncovid_symptom_rate
    covid = state.covid_onset_today(day)
    newly = (covid | noise) & ~state.confirmed & ~state.pending
    cases = np.flatnonzero(newly)
    for p in cases:
        _new_case(spec, state, int(p), day, SYMPTOM, rngs.pcr,
                  followup=bool(covid[p]) or spec.followup_on_noncovid_symptoms)
    return cases


def run_lfd_tests(spec: PolicySpec, day: int, state: SchoolState, candidates: np.ndarray,
                  rngs: PolicyStreams) -> np.ndarray:
    """Request an LFD from each candidate; returns the pupils who tested positive."""
    if candidates.size == 0:
        return candidates
    comply = rngs.compliance.random(candidates.size) < state.compliance_p[candidates]
    tested = candidates[comply]
    if tested.size == 0:
        return tested
    log10_vl = state.log10_vl_on(day)[tested]
    p = lfd_positive_probability(state.lfd, log10_vl, state.sensitivity_effect[tested],
                                 state.last_lfd_in_window(tested, day))
    positive = rngs.lfd.random(tested.size) < p
    state.record_lfd(tested, positive, day)
    return tested[positive]


def screening_actions(spec: PolicySpec, day: int, state: SchoolState, rngs: PolicyStreams) -> None:
    if weekday(day) not in spec.screening_weekdays:
        return
    candidates = np.flatnonzero(~state.isolated(day) & ~state.confirmed)
    for p in run_lfd_tests(spec, day, state, candidates, rngs):
        _new_case(spec, state, int(p), day, LFD_POSITIVE, rngs.pcr)


def test_for_release_actions(spec: PolicySpec, day: int, state: SchoolState, rngs: PolicyStreams) -> None:
    bubbles = sorted({f.bubble for f in state.followups if f.active})
    if bubbles:
        # overlapping follow-ups of one bubble merge: one LFD per pupil per day
        in_scope = np.isin(state.layout.bubble_of, bubbles)
        candidates = np.flatnonzero(in_scope & ~state.isolated(day) & ~state.confirmed)
        for p in run_lfd_tests(spec, day, state, candidates, rngs):
            _new_case(spec, state, int(p), day, LFD_POSITIVE, rngs.pcr)
    for f in state.followups:
        if f.active:
            f.remaining_schooldays -= 1
            if f.remaining_schooldays <= 0:
                f.active = False


def morning_step(spec: PolicySpec, day: int, state: SchoolState, rngs: PolicyStreams) -> SchoolState:
    resolve_pcr_results(spec, day, state)
    symptom_check(spec, day, state, rngs)
    state.closed_today = not is_open(spec, day)
    if not state.closed_today:
        if spec.screening_weekdays:
            screening_actions(spec, day, state, rngs)
        elif spec.kind is PolicyKind.TEST_FOR_RELEASE:
            test_for_release_actions(spec, day, state, rngs)
    state.followups = [f for f in state.followups if f.active]
    return state



test_for_release_actions.__test__ = False  # not a pytest test
