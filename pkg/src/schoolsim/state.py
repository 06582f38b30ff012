"""Mutable per-run school state (struct of arrays) and per-pupil snapshot views."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .disease import (DiseaseParams, HeavyTailNoiseParams, TrajectoryBatch, ViralLoadTrajectory,
                      sample_heavy_tail_noise, with_noise)
from .population import SchoolLayout
from .testing import LFD, PCR, LfdModelParams, PcrModelParams, TestHistory, TestRecord, pcr_test

ATTENDING = "attending"
ISOLATED = "isolated"
CAUSES = ("", "symptom", "lfd_positive", "bubble", "closure")
SYMPTOM, LFD_POSITIVE, BUBBLE, CLOSURE = 1, 2, 3, 4


@dataclass(frozen=True)
class IsolationState:
    status: str
    release_day: int
    cause: Optional[str]


@dataclass(frozen=True)
class PendingPcr:
    pupil: int
    swab_day: int
    scope: str  # "individual" or "bubble"
    positive: bool
    available_day: int


@dataclass
class TfrFollowup:
    bubble: int
    index_pupil: int
    start_day: int
    remaining_schooldays: int
    active: bool = True


@dataclass
class PupilState:
    pupil: int
    trajectory: Optional[ViralLoadTrajectory] = None
    infection_day: Optional[int] = None
    isolation: IsolationState = IsolationState(ATTENDING, 0, None)
    compliance_p: float = 1.0
    sensitivity_effect: float = 0.0
    test_history: TestHistory = field(default_factory=TestHistory)
    days_missed: int = 0
    lfd_tests: int = 0
    pcr_tests: int = 0


class SchoolState:
    """Everything that changes during one run.

    Pupil trajectories are pre-sampled at the start of the run and only take
    effect once a pupil is infected; the VL grid is indexed by days since
    infection.
    """

    def __init__(self, layout: SchoolLayout, horizon: int, disease: DiseaseParams, lfd: LfdModelParams,
                 pcr: PcrModelParams, trajectories: TrajectoryBatch, compliance_p: np.ndarray,
                 sensitivity_effect: np.ndarray, noise: Optional[HeavyTailNoiseParams] = None,
                 noise_rng: Optional[Callable[[int], np.random.Generator]] = None):
        n = layout.n_pupils
        self.layout = layout
        self.horizon = horizon
        self.disease = disease
        self.lfd = lfd
        self.pcr = pcr
        self.noise = noise
        self._noise_rng = noise_rng
        self.trajectories = trajectories
        width = max(horizon, int(noise.window[1]) + 1 if noise is not None else 0) + 1
        self.log10_grid = trajectories.log10_grid(width)
        self.onset_offset = trajectories.onset_offsets()
        self.noise_paths: dict = {}
        self.compliance_p = np.asarray(compliance_p, dtype=float)
        self.sensitivity_effect = np.asarray(sensitivity_effect, dtype=float)

        self.infection_day = np.full(n, -1, dtype=int)
        self.infector = np.full(n, -2, dtype=int)  # -1 external, -2 never infected
        self.histories: List[TestHistory] = [TestHistory() for _ in range(n)]
        self.last_lfd_day = np.full(n, -10**6, dtype=int)
        self.last_lfd_result = np.zeros(n)
        self.lfd_count = np.zeros(n, dtype=int)
        self.pcr_count = np.zeros(n, dtype=int)
        self.days_missed = np.zeros(n, dtype=int)
        self.days_attended = np.zeros(n, dtype=int)

        self.confirmed = np.zeros(n, dtype=bool)
        self.pending = np.zeros(n, dtype=bool)
        self.gates_bubble = np.zeros(n, dtype=bool)
        self.own_release = np.zeros(n, dtype=int)
        self.own_cause = np.zeros(n, dtype=np.int8)
        self.bubble_release = np.zeros(layout.n_bubbles, dtype=int)
        self.pending_pcrs: List[PendingPcr] = []
        self.followups: List[TfrFollowup] = []
        self.closed_today = False

    # --- infection -------------------------------------------------------------------------

    @property
    def n_pupils(self) -> int:
        return self.layout.n_pupils

    @property
    def infected(self) -> np.ndarray:
        return self.infection_day >= 0

    @property
    def susceptible(self) -> np.ndarray:
        return self.infection_day < 0

    def is_susceptible(self, pupil: int) -> bool:
        return self.infection_day[pupil] < 0

    def infect(self, pupils, day: int, infectors=None) -> None:
        pupils = np.asarray(pupils, dtype=int)
        pupils = pupils[self.infection_day[pupils] < 0]
        if pupils.size == 0:
            return
        self.infection_day[pupils] = day
        self.infector[pupils] = -1 if infectors is None else np.asarray(infectors)[: len(pupils)]
        if self.noise is not None and self.noise.enabled:
            hi = int(self.noise.window[1])
            for p in pupils:
                base = self.log10_grid[p, : hi + 1].copy()
                path = sample_heavy_tail_noise(self.noise, self._noise_rng(int(p)), base)
                self.noise_paths[int(p)] = path
                row = base + path
                finite = np.isfinite(base)
                self.log10_grid[p, : hi + 1] = np.where(finite, np.clip(row, 0.0, self.noise.max_log10_vl), -np.inf)

    def log10_vl_on(self, day: int) -> np.ndarray:
        """log10 VL of every pupil at 07:30 on ``day`` (``-inf`` for VL = 0)."""
        out = np.full(self.n_pupils, -np.inf)
        rows = np.flatnonzero((self.infection_day >= 0) & (self.infection_day <= day))
        if rows.size:
            out[rows] = self.log10_grid[rows, day - self.infection_day[rows]]
        return out

    def vl(self, pupil: int, day: int) -> float:
        d0 = self.infection_day[pupil]
        if d0 < 0 or day < d0:
            return 0.0
        value = self.log10_grid[pupil, day - d0]
        return float(10.0 ** value) if np.isfinite(value) else 0.0

    def covid_onset_today(self, day: int) -> np.ndarray:
        return (self.infection_day >= 0) & (self.onset_offset >= 0) & (day - self.infection_day == self.onset_offset)

    # --- isolation -------------------------------------------------------------------------

    def bubble_held(self, day: int) -> np.ndarray:
        gated = np.bincount(self.layout.bubble_of[self.gates_bubble], minlength=self.layout.n_bubbles) > 0
        return gated | (day < self.bubble_release)

    def own_held(self, day: int) -> np.ndarray:
        return self.pending | (day < self.own_release)

    def isolated(self, day: int) -> np.ndarray:
        return self.own_held(day) | self.bubble_held(day)[self.layout.bubble_of]

    def isolate_pending(self, pupil: int, cause: int) -> None:
        self.pending[pupil] = True
        self.own_cause[pupil] = cause

    def isolation_state(self, pupil: int, day: int) -> IsolationState:
        own = bool(self.pending[pupil] or day < self.own_release[pupil])
        b = self.layout.bubble_of[pupil]
        bubble = bool(self.bubble_held(day)[b])
        if not (own or bubble):
            return IsolationState(ATTENDING, day, None)
        release = int(self.own_release[pupil])
        if self.pending[pupil]:
            release = max(release, max((p.available_day for p in self.pending_pcrs if p.pupil == pupil), default=day + 1))
        if bubble:
            gates = [p.available_day for p in self.pending_pcrs if p.scope == "bubble" and self.layout.bubble_of[p.pupil] == b]
            release = max(release, int(self.bubble_release[b]), max(gates, default=0))
        cause = CAUSES[self.own_cause[pupil]] if own else "bubble"
        return IsolationState(ISOLATED, release, cause)

    # --- tests -----------------------------------------------------------------------------

    def record_lfd(self, pupils: np.ndarray, positive: np.ndarray, day: int) -> None:
        self.lfd_count[pupils] += 1
        self.last_lfd_day[pupils] = day
        self.last_lfd_result[pupils] = positive
        for p, r in zip(pupils.tolist(), positive.tolist()):
            self.histories[p].append(TestRecord(day, LFD, bool(r)))

    def last_lfd_in_window(self, pupils: np.ndarray, day: int) -> np.ndarray:
        """0/1 result of the latest LFD in [day - window, day - 1]; nan if none."""
        lag = day - self.last_lfd_day[pupils]
        in_window = (lag >= 1) & (lag <= self.lfd.ar_window)
        return np.where(in_window, self.last_lfd_result[pupils], np.nan)

    def swab_pcr(self, pupil: int, day: int, rng: np.random.Generator, scope: str = "individual") -> PendingPcr:
        result = pcr_test(self.pcr, self.vl(pupil, day), rng, swab_day=day)
        pending = PendingPcr(pupil, day, scope, result.positive, result.available_day)
        self.pending_pcrs.append(pending)
        self.pcr_count[pupil] += 1
        self.histories[pupil].append(TestRecord(day, PCR, result.positive))
        if scope == "bubble":
            self.gates_bubble[pupil] = True
        return pending

    # --- views -----------------------------------------------------------------------------

    def trajectory(self, pupil: int) -> Optional[ViralLoadTrajectory]:
        d0 = int(self.infection_day[pupil])
        if d0 < 0:
            return None
        traj = self.trajectories.trajectory(pupil, d0)
        if pupil in self.noise_paths:
            traj = with_noise(traj, self.noise_paths[pupil])
        return traj

    def pupil(self, pupil: int, day: int) -> PupilState:
        d0 = int(self.infection_day[pupil])
        return PupilState(
            pupil=pupil,
            trajectory=self.trajectory(pupil),
            infection_day=d0 if d0 >= 0 else None,
            isolation=self.isolation_state(pupil, day),
            compliance_p=float(self.compliance_p[pupil]),
            sensitivity_effect=float(self.sensitivity_effect[pupil]),
            test_history=self.histories[pupil],
            days_missed=int(self.days_missed[pupil]),
            lfd_tests=int(self.lfd_count[pupil]),
            pcr_tests=int(self.pcr_count[pupil]),
        )
