"""Scenario configuration, the daily simulation loop and seeded replication."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .disease import DiseaseParams, HeavyTailNoiseParams, sample_trajectories
from .policy import PolicySpec, PolicyStreams, is_open, is_standard_school_day, morning_step
from .population import (ConfigurationError, ContactStructure, SchoolConfig, SchoolLayout, build_school,
                         draw_contacts)
from .rng import substream
from .state import SchoolState
from .testing import ComplianceParams, LfdModelParams, PcrModelParams, sample_compliance
from .transmission import InfectivityParams, infection_probability_log10, resolve_transmissions


@dataclass(frozen=True)
class ScenarioConfig:
    school: SchoolConfig = field(default_factory=SchoolConfig)
    contacts: ContactStructure = field(default_factory=ContactStructure)
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    infectivity: InfectivityParams = field(default_factory=InfectivityParams)
    lfd: LfdModelParams = field(default_factory=LfdModelParams)
    pcr: PcrModelParams = field(default_factory=PcrModelParams)
    compliance: ComplianceParams = field(default_factory=ComplianceParams)
    noise: HeavyTailNoiseParams = field(default_factory=HeavyTailNoiseParams)
    policy: PolicySpec = field(default_factory=PolicySpec)
    horizon_days: int = 42
    external_infection_prob: Optional[float] = None  # None: one expected infection per week
    replications: int = 250
    base_seed: int = 0

    def __post_init__(self):
        if self.horizon_days < 1:
            raise ConfigurationError("horizon_days must be >= 1")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if self.base_seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        if self.external_infection_prob is None:
            object.__setattr__(self, "external_infection_prob", 1.0 / self.school.n_pupils / 7.0)
        if not 0.0 <= self.external_infection_prob <= 1.0:
            raise ConfigurationError("external_infection_prob must lie in [0, 1]")
        if not np.isclose(self.infectivity.lli, self.disease.lli):
            raise ConfigurationError("infectivity.lli and disease.lli must agree")


@dataclass
class RunResult:
    replication: int
    seed: int
    proportion_infected: float
    proportion_schooldays_missed: float
    lfd_tests_per_pupil: float
    pcr_tests_per_pupil: float
    mean_infectious_attending: float
    n_infected: int = 0
    n_external: int = 0
    daily_infectious_attending: Optional[np.ndarray] = field(default=None, repr=False)
    daily_infected: Optional[np.ndarray] = field(default=None, repr=False)
    daily_isolated: Optional[np.ndarray] = field(default=None, repr=False)


def n_standard_school_days(horizon: int) -> int:
    return sum(is_standard_school_day(d) for d in range(horizon))


class Run:
    """One replication: owns its state and random substreams."""

    def __init__(self, config: ScenarioConfig, replication: int, layout: Optional[SchoolLayout] = None):
        self.config = config
        self.replication = replication
        self.layout = layout or build_school(config.school, config.contacts)
        seed = config.base_seed
        n = self.layout.n_pupils
        trajectories = sample_trajectories(config.disease, n, substream(seed, replication, "disease"))
        compliance = sample_compliance(config.compliance, substream(seed, replication, "compliance", 0), n)
        effects = substream(seed, replication, "effects").standard_normal(n)
        self.state = SchoolState(
            self.layout, config.horizon_days, config.disease, config.lfd, config.pcr, trajectories,
            compliance, effects, noise=config.noise if config.noise.enabled else None,
            noise_rng=lambda p: substream(seed, replication, "noise", p),
        )
        self.streams = PolicyStreams(
            symptoms=substream(seed, replication, "symptoms"),
            lfd=substream(seed, replication, "lfd"),
            pcr=substream(seed, replication, "pcr"),
            compliance=substream(seed, replication, "compliance", 1),
        )
        self.external = substream(seed, replication, "external")
        self.transmission = substream(seed, replication, "transmission")
        horizon = config.horizon_days
        self.daily_infectious_attending = np.zeros(horizon, dtype=int)
        self.daily_infected = np.zeros(horizon, dtype=int)
        self.daily_isolated = np.zeros(horizon, dtype=int)
        self.n_external = 0
        self.contacts_today = 0

    def run_day(self, day: int) -> SchoolState:
        cfg, state = self.config, self.state
        # 1. community infections, regardless of attendance
        draws = self.external.random(state.n_pupils)
        new = np.flatnonzero(state.susceptible & (draws < cfg.external_infection_prob))
        state.infect(new, day)
        self.n_external += new.size
        # 2. policy
        morning_step(cfg.policy, day, state, self.streams)
        isolated = state.isolated(day)
        # 3. contacts and transmission on open school days
        self.contacts_today = 0
        if is_open(cfg.policy, day):
            attending = ~isolated
            a, b, _ = draw_contacts(self.layout, attending, substream(cfg.base_seed, self.replication, "contacts", day))
            self.contacts_today = a.size
            p_inf = infection_probability_log10(cfg.infectivity, state.log10_vl_on(day))
            infectees, infectors = resolve_transmissions(a, b, p_inf, state.susceptible, self.transmission)
            state.infect(infectees, day, infectors)
            self.daily_infectious_attending[day] = int(np.count_nonzero(attending & (p_inf > 0)))
        if is_standard_school_day(day):
            missed = isolated | state.closed_today
            state.days_missed += missed
            state.days_attended += ~missed
        self.daily_infected[day] = int(np.count_nonzero(state.infected))
        self.daily_isolated[day] = int(np.count_nonzero(isolated))
        return state

    def run(self) -> RunResult:
        for day in range(self.config.horizon_days):
            self.run_day(day)
        return self.result()

    def result(self) -> RunResult:
        state, horizon = self.state, self.config.horizon_days
        n = state.n_pupils
        school_days = [d for d in range(horizon) if is_standard_school_day(d)]
        denom = max(1, len(school_days)) * n
        open_days = [d for d in school_days if is_open(self.config.policy, d)]
        mean_ia = float(np.mean(self.daily_infectious_attending[open_days])) if open_days else 0.0
        n_inf = int(np.count_nonzero(state.infected))
        return RunResult(
            replication=self.replication,
            seed=self.config.base_seed,
            proportion_infected=n_inf / n,
            proportion_schooldays_missed=float(state.days_missed.sum()) / denom,
            lfd_tests_per_pupil=float(state.lfd_count.sum()) / n,
            pcr_tests_per_pupil=float(state.pcr_count.sum()) / n,
            mean_infectious_attending=mean_ia,
            n_infected=n_inf,
            n_external=self.n_external,
            daily_infectious_attending=self.daily_infectious_attending.copy(),
            daily_infected=self.daily_infected.copy(),
            daily_isolated=self.daily_isolated.copy(),
        )


def run_replication(config: ScenarioConfig, replication: int) -> RunResult:
    return Run(config, replication).run()


def _run_chunk(args):
    config, reps = args
    layout = build_school(config.school, config.contacts)
    return [Run(config, r, layout).run() for r in reps]


def run_scenario(config: ScenarioConfig, replications: Optional[int] = None, threads: int = 1) -> List[RunResult]:
    """Run all replications; run ``r`` is seeded from ``(base_seed, r)`` only."""
    n = config.replications if replications is None else replications
    if n < 1:
        raise ConfigurationError("replications must be >= 1")
    reps = list(range(n))
    if threads <= 1 or n == 1:
        return _run_chunk((config, reps))
    chunks = [reps[i::threads] for i in range(threads)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        results = [r for chunk in pool.map(_run_chunk, [(config, c) for c in chunks]) for r in chunk]
    return sorted(results, key=lambda r: r.replication)
