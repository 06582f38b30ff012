"""LFD and PCR test models, retest autocorrelation and LFD compliance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import expit, logit

from .disease import vl_at
from .population import ConfigurationError

LFD = "LFD"
PCR = "PCR"

# Placeholder curve shape: slope 1 per log10 unit, intercept such that the unscaled
# sensitivity at 1e7 copies/ml is 0.82. Not fitted to assay data; override in configs.
DEFAULT_BETA_TEST = 1.0
DEFAULT_C_TEST = float(logit(0.82) - 7.0 * DEFAULT_BETA_TEST)


@dataclass(frozen=True)
class LfdModelParams:
    beta_test: float = DEFAULT_BETA_TEST
    c_test: float = DEFAULT_C_TEST
    eta: float = 1.0
    specificity: float = 0.998
    a: float = 0.0
    ar_window: int = 3
    beta_u: float = 0.0
    target_mean_sensitivity: Optional[float] = None

    def __post_init__(self):
        if self.beta_test <= 0:
            raise ConfigurationError("lfd.beta_test must be > 0")
        if self.eta <= 0:
            raise ConfigurationError("lfd.eta must be > 0")
        if not 0.0 <= self.a <= 1.0:
            raise ConfigurationError(f"lfd.a must lie in [0, 1], got {self.a!r}")
        if not 0.0 <= self.specificity <= 1.0:
            raise ConfigurationError("lfd.specificity must lie in [0, 1]")
        if self.ar_window < 0:
            raise ConfigurationError("lfd.ar_window must be >= 0")
        if self.beta_u < 0:
            raise ConfigurationError("lfd.beta_u must be >= 0")
        x = self.target_mean_sensitivity
        if x is not None and not 0.0 < x < 1.0:
            raise ConfigurationError("lfd.mean_sensitivity must lie in (0, 1)")


@dataclass(frozen=True)
class PcrModelParams:
    sensitivity_above_lod: float = 0.975
    lod: float = 300.0
    specificity: float = 1.0
    turnaround_days: int = 2

    def __post_init__(self):
        if not 0.0 <= self.sensitivity_above_lod <= 1.0 or not 0.0 <= self.specificity <= 1.0:
            raise ConfigurationError("pcr sensitivity/specificity must lie in [0, 1]")
        if self.turnaround_days < 0:
            raise ConfigurationError("pcr.turnaround_days must be >= 0")


@dataclass(frozen=True)
class ComplianceParams:
    enabled: bool = False
    beta_alpha: float = 2.0 / 15.0
    beta_beta: float = 1.0 / 15.0

    def __post_init__(self):
        if self.beta_alpha <= 0 or self.beta_beta <= 0:
            raise ConfigurationError("compliance Beta shapes must be > 0")

    @property
    def mean(self) -> float:
        return self.beta_alpha / (self.beta_alpha + self.beta_beta) if self.enabled else 1.0


@dataclass(frozen=True)
class TestRecord:
    __test__ = False

    day: int
    kind: str
    positive: bool


@dataclass
class TestHistory:
    __test__ = False

    records: List[TestRecord] = field(default_factory=list)

    def append(self, record: TestRecord) -> None:
        if self.records and record.day < self.records[-1].day:
            raise ValueError("test history is append-only in time")
        self.records.append(record)

    def last_lfd_in_window(self, day: int, window: int) -> Optional[bool]:
        """Most recent LFD result taken in [day - window, day - 1], if any."""
        for rec in reversed(self.records):
            if rec.kind != LFD or rec.day >= day:
                continue
            return rec.positive if rec.day >= day - window else None
        return None

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class PcrResult:
    positive: bool
    swab_day: int
    available_day: int


def lfd_sensitivity(params: LfdModelParams, vl, u=0.0):
    """Scaled logistic sensitivity with an optional per-pupil random effect."""
    vl = np.asarray(vl, dtype=float)
    if np.any(vl <= 0):
        raise ValueError("LFD sensitivity is defined for positive viral loads only")
    return lfd_sensitivity_log10(params, np.log10(vl), u)


def lfd_sensitivity_log10(params: LfdModelParams, log10_vl, u=0.0):
    z = params.beta_test * params.eta * np.asarray(log10_vl, dtype=float) + params.beta_u * np.asarray(u) + params.c_test
    out = expit(z)
    return float(out) if np.ndim(out) == 0 else out


def lfd_positive_probability(params: LfdModelParams, log10_vl, u, last_result):
    """Probability of a positive LFD, vectorised.

    ``log10_vl`` is ``-inf`` for uninfected/cleared pupils, ``last_result`` is
    nan when no LFD was taken in the autocorrelation window, else 0/1.
    """
    log10_vl = np.asarray(log10_vl, dtype=float)
    infected = np.isfinite(log10_vl)
    g = lfd_sensitivity_log10(params, np.where(infected, log10_vl, 0.0), u)
    last = np.asarray(last_result, dtype=float)
    mixed = np.where(np.isnan(last), g, (1.0 - params.a) * g + params.a * np.nan_to_num(last))
    p = np.where(infected, mixed, 1.0 - params.specificity)
    return float(p) if p.ndim == 0 else p


def lfd_test(params: LfdModelParams, pupil, day: int, rng: np.random.Generator) -> bool:
    """Run one LFD test on ``pupil`` (a :class:`~schoolsim.state.PupilState`) and record it."""
    vl = vl_at(pupil.trajectory, day) if pupil.trajectory is not None else 0.0
    log10_vl = np.log10(vl) if vl > 0 else -np.inf
    last = pupil.test_history.last_lfd_in_window(day, params.ar_window)
    p = lfd_positive_probability(params, log10_vl, pupil.sensitivity_effect, np.nan if last is None else float(last))
    positive = bool(rng.random() < p)
    pupil.test_history.append(TestRecord(day, LFD, positive))
    return positive


def pcr_positive_probability(params: PcrModelParams, vl):
    vl = np.asarray(vl, dtype=float)
    p = np.where(vl >= params.lod, params.sensitivity_above_lod, 1.0 - params.specificity)
    return float(p) if p.ndim == 0 else p


def pcr_test(params: PcrModelParams, vl: float, rng: np.random.Generator, swab_day: int = 0) -> PcrResult:
    positive = bool(rng.random() < pcr_positive_probability(params, vl))
    return PcrResult(positive, swab_day, swab_day + params.turnaround_days)


def sample_compliance(params: ComplianceParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Per-pupil probability of actually taking a requested LFD."""
    if not params.enabled:
        return np.ones(n)
    return rng.beta(params.beta_alpha, params.beta_beta, n)
