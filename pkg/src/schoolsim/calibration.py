"""Calibration of the infectivity constant (against R_S) and of the LFD scaling exponent.

gamma: forward-simulate a policy-free, fully susceptible school seeded with a
single index case on day 0, count the index's direct infections over 21 days
(by default only the index transmits),
regress the realised counts on gamma over a grid and invert the fitted line.

eta: draw one pre-symptomatic viral load per sampled trajectory and solve
mean(sensitivity_eta(VL_i)) = x for eta by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .disease import (DiseaseParams, HeavyTailNoiseParams, _log10_curve, sample_conditioned_noise,
                      sample_trajectories)
from .population import ContactStructure, SchoolConfig, SchoolLayout, build_school
from .rng import substream
from .testing import LfdModelParams


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GammaCalibrationSpec:
    gamma_grid: tuple = tuple(np.linspace(0.0, 0.1, 100))
    populations: int = 1000
    resamples: int = 10
    followup_days: int = 21
    asymptomatic_fraction: float = 0.5
    seed: int = 0
    # False: only the index transmits, so nobody else's chain depletes its susceptibles
    secondary_spread: bool = False

    def __post_init__(self):
        grid = np.asarray(self.gamma_grid, dtype=float)
        if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise CalibrationError("gamma_grid must be strictly increasing, nonnegative, with >= 2 values")
        if self.populations < 1 or self.resamples < 1 or self.followup_days < 1:
            raise CalibrationError("populations, resamples and followup_days must be >= 1")

    @classmethod
    def for_lli(cls, lli: float, n: int = 100, **kwargs) -> "GammaCalibrationSpec":
        upper = 0.06 if lli <= 1e3 else 0.1
        return cls(gamma_grid=tuple(np.linspace(0.0, upper, n)), **kwargs)


@dataclass(frozen=True)
class EtaCalibrationSpec:
    n_trajectories: int = 100_000
    asymptomatic_fraction: float = 0.5
    target_x: float = 0.6
    seed: int = 0
    tol: float = 1e-6
    eta_max: float = 64.0

    def __post_init__(self):
        if not 0.0 < self.target_x < 1.0:
            raise CalibrationError("target_x must lie in (0, 1)")


@dataclass
class CalibrationBase:
    """Model pieces the gamma calibration needs; infectivity itself is the unknown."""

    school: SchoolConfig = field(default_factory=SchoolConfig)
    contacts: ContactStructure = field(default_factory=ContactStructure)
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    noise: HeavyTailNoiseParams = field(default_factory=HeavyTailNoiseParams)


# --- gamma ------------------------------------------------------------------------------------

def _population_log10(base: CalibrationBase, n: int, days: int, rng: np.random.Generator) -> np.ndarray:
    """Pre-sampled log10 VL grid (n, days) for a fresh population, noise applied if enabled."""
    batch = sample_trajectories(base.disease, n, rng)
    width = max(days, int(base.noise.window[1]) + 1)
    grid = batch.log10_grid(width)
    if base.noise.enabled:
        hi = int(base.noise.window[1])
        todo = np.arange(n)
        for _ in range(base.noise.max_attempts):
            if todo.size == 0:
                break
            paths = sample_conditioned_noise(base.noise, rng, todo.size)
            seg = grid[todo, : hi + 1]
            total = seg + paths
            finite = np.isfinite(seg)
            ok = np.all(~finite | ((total >= 0) & (total <= base.noise.max_log10_vl)), axis=1)
            good = todo[ok]
            grid[good, : hi + 1] = np.where(finite[ok], total[ok], -np.inf)
            todo = todo[~ok]
        if todo.size:
            raise CalibrationError("heavy-tail noise rejection budget exceeded")
    return grid[:, :days]


def _simulate_index(layout: SchoolLayout, log10_vl: np.ndarray, index: int, gamma: float, lli: float,
                    followup_days: int, rng: np.random.Generator, index_isolated: bool = False,
                    secondary_spread: bool = False) -> int:
    """Direct infections caused by ``index`` in a policy-free school.

    Each infectious pupil's risk-contacts with susceptible pupils are drawn per
    level (bubble, class, school); every contact is an independent transmission
    attempt; a pupil infected by several sources that day is attributed to one
    of them uniformly at random.
    """
    n = layout.n_pupils
    c = layout.contacts
    bubble, klass = layout.bubble_of, layout.class_of
    infection_day = np.full(n, -1)
    infection_day[index] = 0
    infector = np.full(n, -2)
    log_lli = np.log10(lli)
    for day in range(followup_days):
        if day % 7 >= 5:
            continue
        infected = np.flatnonzero(infection_day >= 0)
        offsets = day - infection_day[infected]
        excess = log10_vl[infected, offsets] - log_lli
        with np.errstate(invalid="ignore"):
            p = np.where(np.isfinite(excess) & (excess > 0), np.clip(gamma * excess, 0.0, 1.0), 0.0)
        keep = p > 0
        if index_isolated:
            keep &= infected != index
        if not secondary_spread:
            keep &= infected == index
        src, p = infected[keep], p[keep]
        if src.size == 0:
            continue
        targets = np.flatnonzero(infection_day < 0)
        if targets.size == 0:
            break
        shape = (src.size, targets.size)
        same_b = bubble[src][:, None] == bubble[targets][None, :]
        same_c = klass[src][:, None] == klass[targets][None, :]
        n_contacts = ((rng.random(shape) < c.p_bubble) & same_b).astype(int)
        n_contacts += (rng.random(shape) < c.p_class) & same_c
        n_contacts += rng.random(shape) < c.p_school
        # P(at least one success among n attempts)
        hit = rng.random(shape) < 1.0 - (1.0 - p[:, None]) ** n_contacts
        hit_any = hit.any(axis=0)
        if not hit_any.any():
            continue
        cols = np.flatnonzero(hit_any)
        weights = hit[:, cols] * rng.random((src.size, cols.size))
        chosen = src[np.argmax(weights, axis=0)]
        infection_day[targets[cols]] = day
        infector[targets[cols]] = chosen
    return int(np.count_nonzero(infector == index))


def estimate_rs(gamma: float, spec: GammaCalibrationSpec, base: Optional[CalibrationBase] = None,
                index_isolated: bool = False) -> np.ndarray:
    """Realised reproduction numbers, one per (population, resample)."""
    return _rs_samples([gamma], spec, base or CalibrationBase(), index_isolated)[0]


def _rs_samples(gammas: Sequence[float], spec: GammaCalibrationSpec, base: CalibrationBase,
                index_isolated: bool = False) -> np.ndarray:
    base = replace(base, disease=replace(base.disease, p_symptomatic=1.0 - spec.asymptomatic_fraction))
    layout = build_school(base.school, base.contacts)
    n = layout.n_pupils
    out = np.zeros((len(gammas), spec.populations * spec.resamples))
    for pop in range(spec.populations):
        rng = substream(spec.seed, pop, "calibration", 0)
        grid = _population_log10(base, n, spec.followup_days, rng)
        index = int(rng.integers(n))
        for r in range(spec.resamples):
            for g, gamma in enumerate(gammas):
                # common random numbers across the gamma grid
                sim_rng = substream(spec.seed, pop, "calibration", 1, r)
                out[g, pop * spec.resamples + r] = _simulate_index(
                    layout, grid, index, float(gamma), base.disease.lli, spec.followup_days, sim_rng,
                    index_isolated, spec.secondary_spread)
    return out


@dataclass
class GammaFit:
    intercept: float
    slope: float
    gamma_grid: np.ndarray
    mean_rs: np.ndarray
    n_samples: int

    def predict(self, gamma):
        return self.intercept + self.slope * np.asarray(gamma, dtype=float)

    @property
    def fitted_range(self) -> tuple:
        ends = self.predict(self.gamma_grid[[0, -1]])
        return float(ends.min()), float(ends.max())

    def invert(self, target_rs: float) -> float:
        lo, hi = self.fitted_range
        if not lo <= target_rs <= hi:
            raise CalibrationError(f"target R_S={target_rs} outside fitted range [{lo:.3f}, {hi:.3f}]")
        if self.slope == 0:
            raise CalibrationError("fitted line is flat")
        g0, g1 = float(self.gamma_grid[0]), float(self.gamma_grid[-1])
        f = lambda g: float(self.predict(g)) - target_rs
        if f(g0) == 0:
            return g0
        if f(g1) == 0:
            return g1
        return float(brentq(f, g0, g1, xtol=1e-12))

    def to_dict(self) -> dict:
        return {"intercept": self.intercept, "slope": self.slope, "n_samples": self.n_samples,
                "gamma_grid": [float(g) for g in self.gamma_grid],
                "mean_rs": [float(m) for m in self.mean_rs]}


def fit_line(gammas: np.ndarray, samples: np.ndarray) -> GammaFit:
    """Least squares of every sample on its gamma value (normal equations)."""
    gammas = np.asarray(gammas, dtype=float)
    x = np.repeat(gammas, samples.shape[1])
    y = samples.ravel()
    design = np.column_stack([np.ones_like(x), x])
    coef = np.linalg.solve(design.T @ design, design.T @ y)
    return GammaFit(float(coef[0]), float(coef[1]), gammas, samples.mean(axis=1), int(y.size))


def fit_gamma_curve(spec: GammaCalibrationSpec, base: Optional[CalibrationBase] = None) -> GammaFit:
    base = base or CalibrationBase()
    gammas = np.asarray(spec.gamma_grid, dtype=float)
    return fit_line(gammas, _rs_samples(gammas, spec, base))


def fit_gamma_for_rs(target_rs: float, spec: GammaCalibrationSpec, base: Optional[CalibrationBase] = None,
                     fit: Optional[GammaFit] = None) -> float:
    fit = fit or fit_gamma_curve(spec, base)
    return fit.invert(target_rs)


# --- eta --------------------------------------------------------------------------------------

def presymptomatic_cross_section(disease: DiseaseParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """One log10 VL per trajectory, drawn uniformly from its pre-symptomatic grid days.

    Symptomatic: days with VL > 0 before symptom onset. Asymptomatic: every day
    with VL > 0.
    """
    batch = sample_trajectories(disease, n, rng)
    t0 = disease.t0
    end = np.where(batch.symptomatic, batch.symptom_onset, batch.t3 + 3.0)
    n_days = np.ceil(end - t0 - 1e-12).astype(int)  # grid offsets k with k + t0 < end
    n_days = np.maximum(n_days, 1)
    k = np.floor(rng.random(n) * n_days).astype(int)
    t = k + t0
    values = _log10_curve(t, t0, batch.t1, batch.t2, batch.t3, np.log10(disease.vl_start_fast_growth),
                          batch.log10_peak, np.log10(disease.lli))
    return values[np.isfinite(values)]


def mean_sensitivity(log10_vl: np.ndarray, lfd: LfdModelParams, eta: float, u: Optional[np.ndarray] = None) -> float:
    z = lfd.beta_test * eta * log10_vl + lfd.c_test
    if u is not None and lfd.beta_u != 0:
        z = z + lfd.beta_u * u
    return float(np.mean(expit(z)))


def calibrate_eta(spec: EtaCalibrationSpec, lfd: LfdModelParams, disease: Optional[DiseaseParams] = None) -> float:
    disease = disease or DiseaseParams()
    disease = replace(disease, p_symptomatic=1.0 - spec.asymptomatic_fraction)
    rng = substream(spec.seed, 0, "calibration", 2)
    sample = presymptomatic_cross_section(disease, spec.n_trajectories, rng)
    u = rng.standard_normal(sample.size) if lfd.beta_u != 0 else None
    f = lambda eta: mean_sensitivity(sample, lfd, eta, u) - spec.target_x
    lo, hi = 1e-9, spec.eta_max
    if f(lo) > 0 or f(hi) < 0:
        raise CalibrationError(
            f"mean sensitivity {spec.target_x} unreachable for eta in (0, {spec.eta_max}]: "
            f"range [{f(lo) + spec.target_x:.4f}, {f(hi) + spec.target_x:.4f}]")
    while hi - lo > spec.tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
