"""Shipped infectivity calibration lines and R_S -> gamma lookup."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np

from .calibration import CalibrationBase, CalibrationError, GammaFit
from .disease import DiseaseParams, HeavyTailNoiseParams

TABLE_PATH = Path(__file__).parent / "data" / "calibration.json"

# setting name -> (lli, heavy-tail noise enabled)
SETTINGS = {
    "lli_1e6": (1e6, False),
    "lli_1e3": (1e3, False),
    "heavy_tails": (1e6, True),
}


def base_for_setting(name: str) -> CalibrationBase:
    lli, noise = SETTINGS[name]
    return CalibrationBase(disease=DiseaseParams(lli=lli), noise=HeavyTailNoiseParams(enabled=noise))


def setting_for(lli: float, noise: bool) -> str:
    for name, (l, n) in SETTINGS.items():
        if np.isclose(l, lli) and n == bool(noise):
            return name
    raise CalibrationError(
        f"no shipped calibration for lli={lli:g}, heavy_tails={bool(noise)}; give gamma explicitly "
        "(see the calibrate-gamma command)")


@lru_cache(maxsize=None)
def _tables(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())["tables"]
    except FileNotFoundError:
        raise CalibrationError(f"calibration table missing: {path}") from None


def load_fit(name: str, path: Path = TABLE_PATH) -> GammaFit:
    entry = _tables(str(path))[name]
    return GammaFit(entry["intercept"], entry["slope"], np.asarray(entry["gamma_grid"]),
                    np.asarray(entry["mean_rs"]), entry["n_samples"])


def gamma_for_rs(r_s: float, lli: float = 1e6, noise: bool = False) -> float:
    return load_fit(setting_for(lli, noise)).invert(r_s)
