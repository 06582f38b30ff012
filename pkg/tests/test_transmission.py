import numpy as np
import pytest
from hypothesis import given, strategies as st

from schoolsim.population import ConfigurationError, ContactEvent
from schoolsim.transmission import (InfectivityParams, attempt_transmission, infection_probability,
                                    resolve_transmissions)

P = InfectivityParams(gamma=0.1, lli=1e6)


class Toy:
    def __init__(self, vls, susceptible):
        self.vls, self.sus = vls, susceptible

    def vl(self, pupil, day):
        return self.vls[pupil]

    def is_susceptible(self, pupil):
        return self.sus[pupil]


def test_probability_values():
    assert infection_probability(P, 1e6) == 0.0
    assert infection_probability(P, 1e8) == pytest.approx(0.2)
    assert infection_probability(P, 1e20) == 1.0
    assert infection_probability(P, 0.0) == 0.0
    assert infection_probability(P, 10.0) == 0.0


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        infection_probability(P, -1.0)
    with pytest.raises(ConfigurationError):
        InfectivityParams(gamma=-0.1)


@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 20), st.floats(0, 20))
def test_monotone(g1, g2, l1, l2):
    lo_g, hi_g = sorted((g1, g2))
    lo_v, hi_v = sorted((10 ** l1, 10 ** l2))
    p = lambda g, v: infection_probability(InfectivityParams(gamma=g), v)
    assert p(lo_g, hi_v) <= p(hi_g, hi_v)
    assert p(hi_g, lo_v) <= p(hi_g, hi_v)
    assert 0.0 <= p(hi_g, hi_v) <= 1.0
    if lo_v <= 1e6:
        assert p(hi_g, lo_v) == 0.0


def test_both_susceptible_no_infection(rng):
    toy = Toy({0: 0.0, 1: 0.0}, {0: True, 1: True})
    assert all(attempt_transmission(ContactEvent(0, 1, 0), toy, P, rng) is None for _ in range(100))


def test_both_infected_no_infection(rng):
    toy = Toy({0: 1e11, 1: 1e11}, {0: False, 1: False})
    assert all(attempt_transmission(ContactEvent(0, 1, 0), toy, P, rng) is None for _ in range(100))


def test_transmission_frequency(rng):
    toy = Toy({0: 1e11, 1: 0.0}, {0: False, 1: True})
    hits = sum(attempt_transmission(ContactEvent(0, 1, 0), toy, P, rng) == 1 for _ in range(10_000))
    assert 0.48 <= hits / 10_000 <= 0.52


def test_resolve_each_infectee_once(rng):
    # pupil 0 infectious with p = 1 meets pupil 1 twice and pupil 2 once
    a = np.array([0, 0, 0])
    b = np.array([1, 1, 2])
    p = np.array([1.0, 0.0, 0.0])
    sus = np.array([False, True, True])
    infectees, infectors = resolve_transmissions(a, b, p, sus, rng)
    assert infectees.tolist() == [1, 2] and infectors.tolist() == [0, 0]


def test_repeated_contacts_are_independent_attempts():
    # two contacts with p = 0.3 -> infection probability 1 - 0.7^2
    rng = np.random.default_rng(1)
    a, b = np.array([0, 0]), np.array([1, 1])
    p, sus = np.array([0.3, 0.0]), np.array([False, True])
    n = 20_000
    hits = sum(resolve_transmissions(a, b, p, sus, rng)[0].size for _ in range(n))
    assert hits / n == pytest.approx(1 - 0.7 ** 2, abs=0.012)


def test_no_infection_of_immune(rng):
    a, b = np.array([0]), np.array([1])
    infectees, _ = resolve_transmissions(a, b, np.array([1.0, 1.0]), np.array([False, False]), rng)
    assert infectees.size == 0
