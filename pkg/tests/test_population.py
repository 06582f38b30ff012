import numpy as np
import pytest
from hypothesis import given, strategies as st

from schoolsim.population import (ConfigurationError, ContactEvent, ContactStructure, SchoolConfig, build_school,
                                  draw_contacts, expected_adjacency, sample_daily_contacts)
from schoolsim.rng import substream


def test_default_school_sizes(layout):
    assert layout.n_pupils == 324
    assert layout.n_bubbles == 36
    assert layout.n_classes == 12


def test_minimal_school():
    lay = build_school(SchoolConfig(1, 1, 1, 2))
    assert lay.n_pupils == 2 and lay.n_bubbles == 1


def test_one_bubble_per_class():
    lay = build_school(SchoolConfig(bubbles_per_class=1, pupils_per_bubble=27))
    assert lay.n_pupils == 324 and lay.n_bubbles == 12 and lay.n_classes == 12


@pytest.mark.parametrize("field", ["years", "classes_per_year", "bubbles_per_class", "pupils_per_bubble"])
def test_zero_counts_rejected(field):
    with pytest.raises(ConfigurationError):
        SchoolConfig(**{field: 0})


@pytest.mark.parametrize("value", [-0.1, 1.5])
def test_contact_probability_range(value):
    with pytest.raises(ConfigurationError):
        ContactStructure(p_bubble=value)


def test_default_contact_probabilities(layout):
    c = layout.contacts
    assert c.p_bubble == 1.0
    assert c.p_class == pytest.approx(3 / 26)
    assert c.p_school == pytest.approx(1 / 323)


def test_hierarchy_partitions(layout):
    for b in range(layout.n_bubbles):
        members = layout.bubble_members(b)
        assert len(members) == 9
        assert len(set(layout.class_of[members])) == 1
    for k in range(layout.n_classes):
        assert len(layout.class_members(k)) == 27


def test_contact_event_canonical_order():
    ev = ContactEvent(7, 3, 0)
    assert (ev.pupil_a, ev.pupil_b) == (3, 7)
    with pytest.raises(ValueError):
        ContactEvent(2, 2, 0)


def test_no_attending_no_contacts(layout, rng):
    assert sample_daily_contacts(layout, [], rng) == []


def test_bubble_pair_always_meets():
    lay = build_school(SchoolConfig(1, 1, 1, 2))
    for seed in range(20):
        events = sample_daily_contacts(lay, [0, 1], np.random.default_rng(seed))
        assert any(e.level == "bubble" for e in events)


def test_mean_contacts_per_pupil(layout):
    rng = np.random.default_rng(7)
    attending = np.ones(layout.n_pupils, dtype=bool)
    days = 2000
    total = sum(draw_contacts(layout, attending, rng)[0].size for _ in range(days))
    assert total * 2 / layout.n_pupils / days == pytest.approx(12.0, abs=0.2)


def test_expected_adjacency_entries(layout):
    adj = expected_adjacency(layout)
    assert adj[0, 1] == pytest.approx(1 + 3 / 26 + 1 / 323)
    assert adj[0, 9] == pytest.approx(3 / 26 + 1 / 323)
    assert adj[0, 27] == pytest.approx(1 / 323)
    assert np.all(np.diag(adj) == 0)
    assert np.allclose(adj, adj.T)
    np.testing.assert_allclose(adj.sum(axis=1), 12.0, atol=1e-9)


def test_contacts_deterministic(layout):
    att = range(layout.n_pupils)
    e1 = sample_daily_contacts(layout, att, substream(3, 0, "contacts", 5), day=5)
    e2 = sample_daily_contacts(layout, att, substream(3, 0, "contacts", 5), day=5)
    assert e1 == e2


def test_unknown_pupil_rejected(layout, rng):
    with pytest.raises(ValueError):
        sample_daily_contacts(layout, [400], rng)


@given(st.sets(st.integers(0, 323), max_size=60), st.integers(0, 2**31 - 1))
def test_removing_pupils_removes_only_their_contacts(layout, removed, seed):
    full = np.ones(layout.n_pupils, dtype=bool)
    part = full.copy()
    part[list(removed)] = False
    a1, b1, l1 = draw_contacts(layout, full, np.random.default_rng(seed))
    a2, b2, l2 = draw_contacts(layout, part, np.random.default_rng(seed))
    keep = part[a1] & part[b1]
    assert np.array_equal(a1[keep], a2) and np.array_equal(b1[keep], b2) and np.array_equal(l1[keep], l2)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(1, 5))
def test_layout_counts_property(years, classes, bubbles, pupils):
    cfg = SchoolConfig(years, classes, bubbles, pupils)
    lay = build_school(cfg)
    assert lay.n_pupils == years * classes * bubbles * pupils
    assert lay.n_bubbles == years * classes * bubbles
    adj = expected_adjacency(lay)
    assert np.allclose(adj, adj.T)
