"""YAML scenario files: validation with line numbers, R_S/x resolution and grid expansion.

A file describes one base scenario plus an optional ``grid`` block. Every grid
combination becomes one scenario cell. Example::

    schema_version: 1
    policy: monday_screening
    r_s: 3.0
    mean_sensitivity: 0.6
    grid:
      policy: [reference, monday_screening]
      r_s: [1.5, 3, 6]
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .calibration import CalibrationError, EtaCalibrationSpec, calibrate_eta
from .calibration_tables import gamma_for_rs
from .disease import DiseaseParams, HeavyTailNoiseParams
from .engine import ScenarioConfig
from .policy import PolicyKind, PolicySpec
from .population import ConfigurationError, ContactStructure, SchoolConfig
from .testing import ComplianceParams, LfdModelParams, PcrModelParams
from .transmission import InfectivityParams

SCHEMA_VERSION = 1

_NUM = (int, float)
# section -> {key: accepted python types}
SECTIONS: Dict[str, Dict[str, tuple]] = {
    "school": {"years": (int,), "classes_per_year": (int,), "bubbles_per_class": (int,),
               "pupils_per_bubble": (int,)},
    "contacts": {"p_bubble": _NUM, "p_class": _NUM, "p_school": _NUM},
    "disease": {"lli": _NUM, "vl_start_fast_growth": _NUM, "noncovid_symptom_rate": _NUM},
    "lfd": {"beta_test": _NUM, "c_test": _NUM, "eta": _NUM, "specificity": _NUM, "a": _NUM,
            "ar_window": (int,), "beta_u": _NUM},
    "pcr": {"sensitivity_above_lod": _NUM, "lod": _NUM, "specificity": _NUM, "turnaround_days": (int,)},
    "compliance": {"enabled": (bool,), "beta_alpha": _NUM, "beta_beta": _NUM},
    "heavy_tails": {"enabled": (bool,), "dof": _NUM, "length_scale": _NUM, "scale": _NUM},
    "policy_options": {"isolation_days": (int,), "negative_release_days": (int,),
                       "tfr_followup_schooldays": (int,), "followup_on_noncovid_symptoms": (bool,)},
}
TOP_LEVEL: Dict[str, tuple] = {
    "schema_version": (int,), "name": (str,), "policy": (str,), "replications": (int,), "seed": (int,),
    "horizon_days": (int,), "r_s": _NUM, "gamma": _NUM, "mean_sensitivity": _NUM,
    "asymptomatic_fraction": _NUM, "external_infection_prob": _NUM,
}
GRID_KEYS = ("policy", "r_s", "mean_sensitivity", "asymptomatic_fraction", "a", "lli", "compliance",
             "bubbles_per_class")
GRID_TYPES = {"policy": (str,), "r_s": _NUM, "mean_sensitivity": _NUM, "asymptomatic_fraction": _NUM,
              "a": _NUM, "lli": _NUM, "compliance": (bool,), "bubbles_per_class": (int,)}

# section keys that a grid axis overrides
GRID_ALIASES = {("lfd", "a"): "a", ("disease", "lli"): "lli", ("compliance", "enabled"): "compliance",
                ("school", "bubbles_per_class"): "bubbles_per_class"}

BASELINE = {"policy": "reference", "r_s": 3.0, "mean_sensitivity": 0.6, "asymptomatic_fraction": 0.5}


class ConfigError(ConfigurationError):
    """Invalid scenario file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path, self.line = path, line
        where = f"{path or '<config>'}" + (f":{line}" if line else "")
        super().__init__(f"{where}: {message}")


# --- YAML with positions ----------------------------------------------------------------------

_FLOAT_RE = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+")


def _construct(node, path: tuple, marks: dict):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", line=key_node.start_mark.line + 1)
            marks[path + (key,)] = key_node.start_mark.line + 1
            out[key] = _construct(value_node, path + (key,), marks)
            marks[path + (key,)] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, path + (i,), marks) for i, v in enumerate(node.value)]
    value = yaml.safe_load(yaml.serialize(node))
    # YAML 1.1 reads "1e6" (no dot) as a string; accept it as a number when unquoted
    if isinstance(value, str) and node.style is None and _FLOAT_RE.fullmatch(value):
        return float(value)
    return value


def load_yaml(text: str, source: Optional[str] = None) -> Tuple[dict, dict]:
    """Parse YAML text into plain data plus a map of key path -> line number."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    if node is None:
        return {}, {}
    marks: dict = {}
    try:
        data = _construct(node, (), marks)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[1], source, exc.line) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    return data, marks


# --- scenario cells ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """One fully resolved scenario cell."""

    scenario_id: str
    config: ScenarioConfig
    settings: Dict[str, Any] = field(default_factory=dict)  # user-level knobs (r_s, x, ...)
    gamma: float = 0.0
    eta: float = 1.0

    def resolved_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["policy"]["kind"] = self.config.policy.kind.value
        cfg["contacts_resolved"] = asdict(self.config.contacts.resolve(self.config.school))
        return {"schema_version": SCHEMA_VERSION, "scenario_id": self.scenario_id,
                "settings": self.settings, "gamma": self.gamma, "eta": self.eta, "config": cfg}


@dataclass
class ScenarioGrid:
    name: str
    cells: List[Scenario]
    source: Optional[str] = None

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def single(self) -> Scenario:
        if len(self.cells) != 1:
            raise ConfigError(f"expected a single scenario, file defines {len(self.cells)}", self.source)
        return self.cells[0]


@lru_cache(maxsize=256)
def _eta_for(x: float, beta_test: float, c_test: float, beta_u: float, lli: float, vl_fast: float) -> float:
    lfd = LfdModelParams(beta_test=beta_test, c_test=c_test, beta_u=beta_u)
    return calibrate_eta(EtaCalibrationSpec(target_x=x), lfd, DiseaseParams(lli=lli, vl_start_fast_growth=vl_fast))


def resolve_eta(x: float, lfd: LfdModelParams, disease: DiseaseParams) -> float:
    """eta giving pre-symptomatic mean sensitivity ``x`` (cached per curve and disease)."""
    return _eta_for(float(x), lfd.beta_test, lfd.c_test, lfd.beta_u, disease.lli, disease.vl_start_fast_growth)


def _check_type(value, types: tuple, key: str, source, line) -> None:
    ok = isinstance(value, types) and not (isinstance(value, bool) and bool not in types)
    if not ok:
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"{key}: expected {names}, got {value!r}", source, line)


def _validate_shape(data: dict, marks: dict, source) -> None:
    allowed = set(TOP_LEVEL) | set(SECTIONS) | {"grid"}
    for key, value in data.items():
        line = marks.get((key,))
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", source, line)
        if key in TOP_LEVEL:
            _check_type(value, TOP_LEVEL[key], key, source, line)
        elif key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping", source, line)
            for sub, v in value.items():
                sl = marks.get((key, sub))
                if sub not in SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{sub!s}", source, sl)
                _check_type(v, SECTIONS[key][sub], f"{key}.{sub}", source, sl)
        else:
            if not isinstance(value, dict) or not value:
                raise ConfigError("grid: expected a nonempty mapping of lists", source, line)
            for sub, v in value.items():
                sl = marks.get(("grid", sub))
                if sub not in GRID_KEYS:
                    raise ConfigError(f"unknown grid key {sub!r}; allowed: {', '.join(GRID_KEYS)}", source, sl)
                if not isinstance(v, list) or not v:
                    raise ConfigError(f"grid.{sub}: expected a nonempty list", source, sl)
                for i, item in enumerate(v):
                    _check_type(item, GRID_TYPES[sub], f"grid.{sub}[{i}]", source, marks.get(("grid", sub, i), sl))
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}; this build reads {SCHEMA_VERSION}",
                          source, marks.get(("schema_version",)))
    if "gamma" in data and "r_s" in data:
        raise ConfigError("give either gamma or r_s, not both", source, marks.get(("gamma",)))
    if "eta" in data.get("lfd", {}) and "mean_sensitivity" in data:
        raise ConfigError("give either lfd.eta or mean_sensitivity, not both", source, marks.get(("lfd", "eta")))
    grid = data.get("grid", {})
    if "r_s" in grid and "gamma" in data:
        raise ConfigError("grid.r_s cannot be combined with a fixed gamma", source, marks.get(("grid", "r_s")))
    if "mean_sensitivity" in grid and "eta" in data.get("lfd", {}):
        raise ConfigError("grid.mean_sensitivity cannot be combined with a fixed lfd.eta", source,
                          marks.get(("grid", "mean_sensitivity")))


def _cell_id(name: str, combo: dict) -> str:
    if not combo:
        return name
    return name + "__" + "__".join(f"{k}={v}" for k, v in combo.items())


def _build(data: dict, combo: dict, marks: dict, source, name: str) -> Scenario:
    sec = {k: dict(data.get(k, {})) for k in SECTIONS}
    knobs = {k: data.get(k, BASELINE.get(k)) for k in ("policy", "r_s", "mean_sensitivity", "asymptomatic_fraction")}
    for key, value in combo.items():
        if key in knobs:
            knobs[key] = value
        elif key == "a":
            sec["lfd"]["a"] = value
        elif key == "lli":
            sec["disease"]["lli"] = value
        elif key == "compliance":
            sec["compliance"]["enabled"] = value
        elif key == "bubbles_per_class":
            sec["school"]["bubbles_per_class"] = value

    def where(*path):
        for p in (("grid",) + path[-1:], path, path[:1]):
            if p in marks:
                return marks[p]
        return None

    def key_line(section: str, message: str):
        for sub in sorted(sec[section], key=len, reverse=True):
            if re.search(rf"\.{re.escape(sub)}\b", message):
                grid_key = GRID_ALIASES.get((section, sub))
                if grid_key in combo:
                    return marks.get(("grid", grid_key))
                return marks.get((section, sub), marks.get((section,)))
        return marks.get((section,))

    def build(section: str, cls, **extra):
        try:
            return cls(**sec[section], **extra)
        except ConfigurationError as exc:
            raise ConfigError(str(exc), source, key_line(section, str(exc))) from None
        except TypeError as exc:
            raise ConfigError(f"{section}: {exc}", source, marks.get((section,))) from None

    af = knobs["asymptomatic_fraction"]
    if not 0.0 <= af <= 1.0:
        raise ConfigError(f"asymptomatic_fraction must lie in [0, 1], got {af!r}", source, where("asymptomatic_fraction"))
    school = build("school", SchoolConfig)
    contacts = build("contacts", ContactStructure)
    disease = build("disease", DiseaseParams, p_symptomatic=1.0 - af)
    pcr = build("pcr", PcrModelParams)
    compliance = build("compliance", ComplianceParams)
    noise = build("heavy_tails", HeavyTailNoiseParams)
    try:
        policy = PolicySpec(kind=PolicyKind.parse(knobs["policy"]), **sec["policy_options"])
    except ConfigurationError as exc:
        raise ConfigError(str(exc), source, where("policy")) from None

    settings = dict(knobs)
    if "gamma" in data:
        gamma = float(data["gamma"])
        settings["r_s"] = None
    else:
        try:
            gamma = gamma_for_rs(float(knobs["r_s"]), disease.lli, noise.enabled)
        except CalibrationError as exc:
            raise ConfigError(str(exc), source, where("r_s")) from None
    lfd_fixed = dict(sec["lfd"])
    if "eta" in lfd_fixed:
        lfd = build("lfd", LfdModelParams)
        settings["mean_sensitivity"] = None
    else:
        x = float(knobs["mean_sensitivity"])
        lfd0 = build("lfd", LfdModelParams)
        try:
            eta = resolve_eta(x, lfd0, disease)
        except (CalibrationError, ConfigurationError) as exc:
            raise ConfigError(str(exc), source, where("mean_sensitivity")) from None
        lfd = replace(lfd0, eta=eta, target_mean_sensitivity=x)
    settings.update(a=lfd.a, lli=disease.lli, compliance=compliance.enabled,
                    bubbles_per_class=school.bubbles_per_class, heavy_tails=noise.enabled)
    try:
        infectivity = InfectivityParams(gamma=gamma, lli=disease.lli)
        top = {k: data[k] for k in ("horizon_days", "external_infection_prob") if k in data}
        config = ScenarioConfig(school=school, contacts=contacts, disease=disease, infectivity=infectivity,
                                lfd=lfd, pcr=pcr, compliance=compliance, noise=noise, policy=policy,
                                replications=data.get("replications", 250), base_seed=data.get("seed", 0), **top)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), source, None) from None
    return Scenario(_cell_id(name, combo), config, settings, gamma, lfd.eta)


def parse_config_text(text: str, source: Optional[str] = None) -> ScenarioGrid:
    data, marks = load_yaml(text, source)
    _validate_shape(data, marks, source)
    name = data.get("name", "scenario")
    grid = data.get("grid", {})
    keys = [k for k in GRID_KEYS if k in grid]
    cells = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cells.append(_build(data, dict(zip(keys, values)), marks, source, name))
    return ScenarioGrid(name, cells, source)


def parse_config(path) -> ScenarioGrid:
    """Read and validate a scenario file; every grid cell is resolved to a :class:`ScenarioConfig`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config_text(text, str(path))


def dumps_resolved(scenario: Scenario) -> str:
    return json.dumps(scenario.resolved_dict(), indent=2, sort_keys=True) + "\n"
