"""Deterministic hand-built scenarios for policy tests."""

import numpy as np

from schoolsim.disease import DiseaseParams
from schoolsim.engine import Run, ScenarioConfig
from schoolsim.policy import PolicySpec
from schoolsim.testing import LfdModelParams, PcrModelParams
from schoolsim.transmission import InfectivityParams


def quiet_run(kind, pcr_positive=True, lfd_c=50.0, a=0.0, noise_rate=0.0, horizon=42, gamma=0.0, replication=0,
              **extra):
    """A run with no community infections, no transmission (by default) and deterministic tests."""
    cfg = ScenarioConfig(
        disease=DiseaseParams(noncovid_symptom_rate=noise_rate),
        infectivity=InfectivityParams(gamma=gamma),
        lfd=LfdModelParams(c_test=lfd_c, specificity=1.0, a=a),
        pcr=PcrModelParams(sensitivity_above_lod=1.0 if pcr_positive else 0.0),
        policy=PolicySpec(kind=kind, **extra),
        external_infection_prob=0.0,
        horizon_days=horizon,
    )
    return Run(cfg, replication)


def seed_case(run, pupil, infection_day, onset_offset=-1, log10_vl=8.0):
    """Infect ``pupil`` with a flat high viral load and an optional symptom onset offset."""
    st = run.state
    st.infect(np.array([pupil]), infection_day)
    st.log10_grid[pupil, 1:20] = log10_vl
    st.onset_offset[pupil] = onset_offset


def run_days(run, days):
    for d in days:
        run.run_day(d)
