"""Per-contact infection probability and resolution of transmission attempts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .population import ConfigurationError, ContactEvent


@dataclass(frozen=True)
class InfectivityParams:
    gamma: float = 0.0
    lli: float = 1e6

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigurationError(f"infectivity.gamma must be >= 0, got {self.gamma!r}")
        if self.lli <= 0:
            raise ConfigurationError("infectivity.lli must be > 0")


def infection_probability_log10(params: InfectivityParams, log10_vl):
    """Same as :func:`infection_probability` but takes log10 VL (``-inf`` for VL = 0)."""
    excess = np.asarray(log10_vl, dtype=float) - np.log10(params.lli)
    with np.errstate(invalid="ignore"):
        p = np.clip(params.gamma * excess, 0.0, 1.0)
    p = np.where(np.isfinite(excess) & (excess > 0), p, 0.0)
    return float(p) if p.ndim == 0 else p


def infection_probability(params: InfectivityParams, vl):
    """min(1, max(0, gamma * (log10(vl) - log10(lli)))), and 0 for vl = 0."""
    vl = np.asarray(vl, dtype=float)
    if np.any(vl < 0):
        raise ValueError("viral load must be nonnegative")
    with np.errstate(divide="ignore"):
        return infection_probability_log10(params, np.log10(vl))


class PupilStateView(Protocol):
    def vl(self, pupil: int, day: int) -> float: ...

    def is_susceptible(self, pupil: int) -> bool: ...


def attempt_transmission(contact: ContactEvent, states: PupilStateView, params: InfectivityParams,
                         rng: np.random.Generator) -> Optional[int]:
    """Return the newly infected pupil, if any, for one risk-contact."""
    a, b, day = contact.pupil_a, contact.pupil_b, contact.day
    for src, dst in ((a, b), (b, a)):
        if states.is_susceptible(dst) and not states.is_susceptible(src):
            p = infection_probability(params, states.vl(src, day))
            if p > 0 and rng.random() < p:
                return dst
            return None
    return None


def resolve_transmissions(a: np.ndarray, b: np.ndarray, p_infect: np.ndarray, susceptible: np.ndarray,
                          rng: np.random.Generator):
    """Vectorised resolution of a day's contacts.

    ``p_infect`` is the per-pupil infection probability for that day (0 for
    non-infectious pupils). Returns ``(infectees, infectors)``; each infectee
    appears once, attributed to its first successful contact.
    """
    fwd = (p_infect[a] > 0) & susceptible[b]
    bwd = (p_infect[b] > 0) & susceptible[a]
    src = np.concatenate([a[fwd], b[bwd]])
    dst = np.concatenate([b[fwd], a[bwd]])
    if src.size == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    order = rng.permutation(src.size)
    src, dst = src[order], dst[order]
    hit = rng.random(src.size) < p_infect[src]
    src, dst = src[hit], dst[hit]
    infectees, first = np.unique(dst, return_index=True)
    return infectees, src[first]
