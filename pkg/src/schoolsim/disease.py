"""Viral-load trajectories, symptom onset and heavy-tailed trajectory noise.

Time is measured in days since midnight of the infection day; all quantities are
evaluated on the daily 07:30 grid ``k + 7.5/24``. Log10 viral load is piecewise
linear through the pivots

    (t0, 0) -> (t1, log10 start_fast_growth) -> (t2, peak) -> (t3, log10 lli) -> (t3 + 3, 0)

and the viral load is zero outside ``[t0, t3 + 3]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .population import ConfigurationError

T0 = 7.5 / 24
CLEARANCE_DAYS = 3.0


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiseaseParams:
    p_symptomatic: float = 0.5
    lli: float = 1e6
    vl_start_fast_growth: float = 1e3
    noncovid_symptom_rate: float = 0.01
    t0: float = T0

    def __post_init__(self):
        if not 0.0 <= self.p_symptomatic <= 1.0:
            raise ConfigurationError(f"disease.p_symptomatic must lie in [0, 1], got {self.p_symptomatic!r}")
        if not 0.0 <= self.noncovid_symptom_rate <= 1.0:
            raise ConfigurationError("disease.noncovid_symptom_rate must lie in [0, 1]")
        if self.vl_start_fast_growth < 1 or self.lli <= 1:
            raise ConfigurationError("disease.lli and disease.vl_start_fast_growth must exceed 1 copy/ml")
        if self.lli < self.vl_start_fast_growth:
            raise ConfigurationError("disease.lli must be >= disease.vl_start_fast_growth")


@dataclass(frozen=True)
class HeavyTailNoiseParams:
    enabled: bool = False
    dof: float = 3.0
    length_scale: float = 5.0
    scale: float = float(np.sqrt(3.0))
    window: tuple = (0, 10)
    max_log10_vl: float = 15.0
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.dof <= 0 or self.length_scale <= 0 or self.scale < 0:
            raise ConfigurationError("noise.dof, noise.length_scale must be > 0 and noise.scale >= 0")
        lo, hi = self.window
        if int(lo) != lo or int(hi) != hi or hi - lo < 2:
            raise ConfigurationError("noise.window must be two integer day offsets at least 2 apart")


@dataclass(frozen=True)
class ViralLoadTrajectory:
    t1: float
    t2: float
    t3: float
    log10_peak: float
    symptomatic: bool
    symptom_onset: Optional[float] = None
    infection_day: int = 0
    log10_start: float = 3.0
    log10_lli: float = 6.0
    t0: float = T0
    # additive log10 noise on integer day offsets 0..len-1
    noise: Optional[np.ndarray] = field(default=None, compare=False)
    max_log10_vl: float = 15.0

    @property
    def support_end(self) -> float:
        return self.t3 + CLEARANCE_DAYS

    def log10_at_time(self, t):
        return _log10_curve(
            np.asarray(t, dtype=float), self.t0, self.t1, self.t2, self.t3,
            self.log10_start, self.log10_peak, self.log10_lli,
        )

    def symptom_onset_offset(self) -> Optional[int]:
        """First grid day offset on which the pupil shows symptoms."""
        if not self.symptomatic:
            return None
        return int(np.ceil(self.symptom_onset - self.t0 - 1e-12))

    def is_symptomatic_on(self, day: int) -> bool:
        if not self.symptomatic:
            return False
        t = day - self.infection_day + self.t0
        return self.symptom_onset <= t <= self.t3


def _log10_curve(t, t0, t1, t2, t3, y1, y2, y3):
    """Piecewise-linear log10 VL; -inf outside the support. Broadcasts."""
    t4 = t3 + CLEARANCE_DAYS
    with np.errstate(divide="ignore", invalid="ignore"):
        seg0 = (t - t0) / (t1 - t0) * y1
        seg1 = y1 + (t - t1) / (t2 - t1) * (y2 - y1)
        seg2 = y2 + (t - t2) / (t3 - t2) * (y3 - y2)
        seg3 = y3 * (t4 - t) / CLEARANCE_DAYS
    out = np.where(t < t1, seg0, np.where(t < t2, seg1, np.where(t < t3, seg2, seg3)))
    # VL is 0 (log10 = -inf) outside [t0, t3 + 3); the end point itself has log10 0 -> VL 1,
    # but "reaches 0 at t3 + 3" so the closed end is excluded.
    return np.where((t >= t0) & (t < t4), out, -np.inf)


@dataclass
class TrajectoryBatch:
    """Struct-of-arrays sample of trajectories (used by the simulation hot path)."""

    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    log10_peak: np.ndarray
    symptomatic: np.ndarray
    symptom_onset: np.ndarray  # nan when asymptomatic
    params: DiseaseParams

    def __len__(self) -> int:
        return len(self.t1)

    def log10_grid(self, n_days: int) -> np.ndarray:
        """log10 VL on offsets 0..n_days-1, shape (n, n_days)."""
        t = np.arange(n_days)[None, :] + self.params.t0
        return _log10_curve(
            t, self.params.t0, self.t1[:, None], self.t2[:, None], self.t3[:, None],
            np.log10(self.params.vl_start_fast_growth), self.log10_peak[:, None],
            np.log10(self.params.lli),
        )

    def onset_offsets(self) -> np.ndarray:
        """Grid offset of symptom onset, -1 for asymptomatic trajectories."""
        off = np.ceil(self.symptom_onset - self.params.t0 - 1e-12)
        return np.where(self.symptomatic, np.nan_to_num(off, nan=-1), -1).astype(int)

    def trajectory(self, i: int, infection_day: int = 0) -> ViralLoadTrajectory:
        p = self.params
        return ViralLoadTrajectory(
            t1=float(self.t1[i]), t2=float(self.t2[i]), t3=float(self.t3[i]),
            log10_peak=float(self.log10_peak[i]), symptomatic=bool(self.symptomatic[i]),
            symptom_onset=float(self.symptom_onset[i]) if self.symptomatic[i] else None,
            infection_day=infection_day, log10_start=float(np.log10(p.vl_start_fast_growth)),
            log10_lli=float(np.log10(p.lli)), t0=p.t0,
        )


def sample_trajectories(params: DiseaseParams, n: int, rng: np.random.Generator) -> TrajectoryBatch:
    symptomatic = rng.random(n) < params.p_symptomatic
    t1 = rng.uniform(2.5, 3.5, n)
    t2 = t1 + 0.5 + np.minimum(3.0, rng.gamma(1.5, 1.0, n))
    log10_peak = rng.uniform(7.0, 11.0, n)
    clearance = rng.uniform(4.0, 9.0, n)
    onset_delay = rng.uniform(0.0, 3.0, n)
    onset_delay = np.where(symptomatic, onset_delay, 0.0)
    t3 = t2 + clearance + onset_delay
    onset = np.where(symptomatic, t2 + onset_delay, np.nan)
    return TrajectoryBatch(t1, t2, t3, log10_peak, symptomatic, onset, params)


def sample_trajectory(params: DiseaseParams, infection_day: int, rng: np.random.Generator) -> ViralLoadTrajectory:
    return sample_trajectories(params, 1, rng).trajectory(0, infection_day)


def vl_at(traj: ViralLoadTrajectory, day: int) -> float:
    """Viral load (copies/ml) at 07:30 on ``day``."""
    offset = day - traj.infection_day
    if offset < 0:
        return 0.0
    log10 = float(traj.log10_at_time(offset + traj.t0))
    if not np.isfinite(log10):
        return 0.0
    if traj.noise is not None and offset < len(traj.noise):
        log10 = min(max(log10 + float(traj.noise[offset]), 0.0), traj.max_log10_vl)
    return float(10.0 ** log10)


def sample_noncovid_symptom(params: DiseaseParams, rng: np.random.Generator, size=None):
    draw = rng.random(size) < params.noncovid_symptom_rate
    return bool(draw) if size is None else draw


# --- heavy-tailed noise ---------------------------------------------------------------------

def squared_exponential(x: np.ndarray, length_scale: float) -> np.ndarray:
    d = x[:, None] - x[None, :]
    return np.exp(-d ** 2 / (2.0 * length_scale ** 2))


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root; the SE kernel on a short grid is near singular."""
    w, v = np.linalg.eigh((cov + cov.T) / 2.0)
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_t_process(offsets: np.ndarray, params: HeavyTailNoiseParams, rng: np.random.Generator,
                     size: int = 1) -> np.ndarray:
    """Unconditioned Student-t process paths, shape (size, len(offsets))."""
    offsets = np.asarray(offsets, dtype=float)
    factor = _psd_factor(squared_exponential(offsets, params.length_scale))
    z = rng.standard_normal((size, len(offsets))) @ factor.T
    w = rng.chisquare(params.dof, size) / params.dof
    return params.scale * z / np.sqrt(w)[:, None]


def _conditioned_factor(params: HeavyTailNoiseParams):
    lo, hi = (int(v) for v in params.window)
    grid = np.arange(lo, hi + 1, dtype=float)
    k = squared_exponential(grid, params.length_scale)
    inner = slice(1, len(grid) - 1)
    ends = [0, len(grid) - 1]
    k11 = k[inner, inner]
    k12 = k[inner][:, ends]
    k22 = k[np.ix_(ends, ends)]
    cond = k11 - k12 @ np.linalg.solve(k22, k12.T)
    return lo, hi, _psd_factor(cond)


def sample_conditioned_noise(params: HeavyTailNoiseParams, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """t-process paths pinned to zero at both window ends, shape (size, hi + 1).

    Conditioning a multivariate t (dof v) on two zero observations gives a
    multivariate t with dof v + 2 and scale matrix v/(v + 2) times the Gaussian
    conditional covariance.
    """
    lo, hi, factor = _conditioned_factor(params)
    nu = params.dof
    z = rng.standard_normal((size, factor.shape[0])) @ factor.T
    w = rng.chisquare(nu + 2.0, size)
    inner = params.scale * np.sqrt(nu) * z / np.sqrt(w)[:, None]
    out = np.zeros((size, hi + 1))
    out[:, lo + 1:hi] = inner
    return out


def sample_heavy_tail_noise(params: HeavyTailNoiseParams, rng: np.random.Generator,
                            base_log10: Optional[np.ndarray] = None) -> np.ndarray:
    """Additive log10 noise on day offsets 0..window_end.

    With ``base_log10`` (log10 VL on the same offsets) paths are redrawn until the
    noisy trajectory stays nonnegative and below ``max_log10_vl``.
    """
    if not params.enabled:
        raise SamplingError("heavy-tail noise is disabled")
    if base_log10 is None:
        return sample_conditioned_noise(params, rng, 1)[0]
    base = np.asarray(base_log10, dtype=float)
    for _ in range(params.max_attempts):
        path = sample_conditioned_noise(params, rng, 1)[0]
        m = min(len(path), len(base))
        total = base[:m] + path[:m]
        finite = np.isfinite(base[:m])
        if np.all(total[finite] >= 0.0) and np.all(total[finite] <= params.max_log10_vl):
            return path
    raise SamplingError(f"no admissible noise path after {params.max_attempts} attempts")


def with_noise(traj: ViralLoadTrajectory, noise: np.ndarray) -> ViralLoadTrajectory:
    return replace(traj, noise=np.asarray(noise, dtype=float))
