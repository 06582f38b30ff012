"""School hierarchy (school > class > bubble > pupil) and daily risk-contacts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

LEVELS = ("bubble", "class", "school")


class ConfigurationError(ValueError):
    """Raised for invalid scenario parameters."""


@dataclass(frozen=True)
class SchoolConfig:
    years: int = 6
    classes_per_year: int = 2
    bubbles_per_class: int = 3
    pupils_per_bubble: int = 9

    def __post_init__(self):
        for name in ("years", "classes_per_year", "bubbles_per_class", "pupils_per_bubble"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"school.{name} must be an integer >= 1, got {value!r}")

    @property
    def n_classes(self) -> int:
        return self.years * self.classes_per_year

    @property
    def class_size(self) -> int:
        return self.bubbles_per_class * self.pupils_per_bubble

    @property
    def n_pupils(self) -> int:
        return self.n_classes * self.class_size


@dataclass(frozen=True)
class ContactStructure:
    """Daily probability of a risk-contact for a pair sharing each level.

    ``None`` for ``p_class``/``p_school`` means the default scaling: three expected
    extra contacts within the class and one within the school per pupil.
    """

    p_bubble: float = 1.0
    p_class: Optional[float] = None
    p_school: Optional[float] = None

    def __post_init__(self):
        for name in ("p_bubble", "p_class", "p_school"):
            value = getattr(self, name)
            if value is None:
                continue
            if not 0.0 <= float(value) <= 1.0:
                raise ConfigurationError(f"contacts.{name} must lie in [0, 1], got {value!r}")

    def resolve(self, config: SchoolConfig) -> "ContactStructure":
        p_class = self.p_class
        if p_class is None:
            p_class = 3.0 / (config.class_size - 1) if config.class_size > 1 else 0.0
        p_school = self.p_school
        if p_school is None:
            p_school = 1.0 / (config.n_pupils - 1) if config.n_pupils > 1 else 0.0
        return ContactStructure(float(self.p_bubble), min(1.0, float(p_class)), min(1.0, float(p_school)))


@dataclass(frozen=True)
class ContactEvent:
    pupil_a: int
    pupil_b: int
    day: int
    level: str = "bubble"

    def __post_init__(self):
        if self.pupil_a == self.pupil_b:
            raise ValueError("a risk-contact needs two distinct pupils")
        if self.pupil_a > self.pupil_b:
            a, b = self.pupil_b, self.pupil_a
            object.__setattr__(self, "pupil_a", a)
            object.__setattr__(self, "pupil_b", b)


def _pairs_within(groups: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs (a < b) of pupils sharing the same group label."""
    a, b = np.triu_indices(len(groups), 1)
    same = groups[a] == groups[b]
    return a[same], b[same]


@dataclass
class SchoolLayout:
    config: SchoolConfig
    contacts: ContactStructure
    bubble_of: np.ndarray
    class_of: np.ndarray
    # canonical (a < b) pair lists per level, fixed order
    pairs: dict = field(repr=False, default_factory=dict)

    @property
    def n_pupils(self) -> int:
        return len(self.bubble_of)

    @property
    def n_bubbles(self) -> int:
        return int(self.bubble_of.max()) + 1

    @property
    def n_classes(self) -> int:
        return int(self.class_of.max()) + 1

    def level_probability(self, level: str) -> float:
        return {"bubble": self.contacts.p_bubble, "class": self.contacts.p_class,
                "school": self.contacts.p_school}[level]

    def bubble_members(self, bubble: int) -> np.ndarray:
        return np.flatnonzero(self.bubble_of == bubble)

    def class_members(self, klass: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == klass)

    def to_dict(self) -> dict:
        return {
            "years": self.config.years,
            "classes_per_year": self.config.classes_per_year,
            "bubbles_per_class": self.config.bubbles_per_class,
            "pupils_per_bubble": self.config.pupils_per_bubble,
            "n_pupils": self.n_pupils,
            "n_bubbles": self.n_bubbles,
            "n_classes": self.n_classes,
            "p_bubble": self.contacts.p_bubble,
            "p_class": self.contacts.p_class,
            "p_school": self.contacts.p_school,
        }


def build_school(config: SchoolConfig, contacts: Optional[ContactStructure] = None) -> SchoolLayout:
    """Assign pupils to bubbles and classes; pupil ids run bubble by bubble."""
    if not isinstance(config, SchoolConfig):
        raise ConfigurationError("build_school expects a SchoolConfig")
    contacts = (contacts or ContactStructure()).resolve(config)
    n = config.n_pupils
    pupils = np.arange(n)
    bubble_of = pupils // config.pupils_per_bubble
    class_of = pupils // config.class_size
    pairs = {
        "bubble": _pairs_within(bubble_of),
        "class": _pairs_within(class_of),
        "school": np.triu_indices(n, 1),
    }
    return SchoolLayout(config, contacts, bubble_of, class_of, pairs)


def draw_contacts(layout: SchoolLayout, attending: np.ndarray, rng: np.random.Generator):
    """Vectorised contact draw.

    One uniform is drawn for every pair at every level, whether or not the pair
    attends, so that the draw for a given (pair, level) does not depend on who is
    isolating. Returns ``(a, b, level_index)`` arrays, one entry per contact.
    """
    attending = np.asarray(attending, dtype=bool)
    out_a, out_b, out_level = [], [], []
    for k, level in enumerate(LEVELS):
        a, b = layout.pairs[level]
        u = rng.random(len(a))
        hit = (u < layout.level_probability(level)) & attending[a] & attending[b]
        out_a.append(a[hit])
        out_b.append(b[hit])
        out_level.append(np.full(int(hit.sum()), k, dtype=np.int8))
    return np.concatenate(out_a), np.concatenate(out_b), np.concatenate(out_level)


def sample_daily_contacts(layout: SchoolLayout, attending: Iterable[int], rng: np.random.Generator,
                          day: int = 0) -> List[ContactEvent]:
    mask = np.zeros(layout.n_pupils, dtype=bool)
    idx = np.fromiter(attending, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= layout.n_pupils):
        raise ValueError("attending contains unknown pupil ids")
    mask[idx] = True
    a, b, lev = draw_contacts(layout, mask, rng)
    return [ContactEvent(int(x), int(y), day, LEVELS[k]) for x, y, k in zip(a, b, lev)]


def expected_adjacency(layout: SchoolLayout) -> np.ndarray:
    """Expected number of daily pair-wise risk-contacts (zero diagonal)."""
    same_bubble = layout.bubble_of[:, None] == layout.bubble_of[None, :]
    same_class = layout.class_of[:, None] == layout.class_of[None, :]
    c = layout.contacts
    adj = c.p_school + c.p_class * same_class + c.p_bubble * same_bubble
    np.fill_diagonal(adj, 0.0)
    return adj
