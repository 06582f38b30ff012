"""Aggregation of run results and CSV/JSON emission.

Quartiles use linear interpolation between order statistics (numpy's default
``linear`` method): the q-quantile of n sorted values sits at position q*(n-1).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .engine import RunResult

OUTCOMES = ("proportion_infected", "proportion_schooldays_missed", "lfd_tests_per_pupil", "pcr_tests_per_pupil")
RUN_COLUMNS = ("scenario_id", "replication", "seed") + OUTCOMES + ("mean_infectious_attending", "n_infected",
                                                                    "n_external")
STATS = ("mean", "q25", "median", "q75", "min", "max")
SUMMARY_COLUMNS = ("scenario_id", "outcome", "n") + STATS
DAILY_COLUMNS = ("scenario_id", "replication", "day", "infected", "isolated", "infectious_attending")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeStats:
    mean: float
    q25: float
    median: float
    q75: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "OutcomeStats":
        v = np.asarray(values, dtype=float)
        q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
        return cls(float(v.mean()), float(q25), float(med), float(q75), float(v.min()), float(v.max()))


@dataclass
class OutcomeSummary:
    scenario_id: str
    n_runs: int
    stats: Dict[str, OutcomeStats]
    table: List[dict]  # raw per-run rows, sorted by replication

    def median(self, outcome: str) -> float:
        return self.stats[outcome].median

    def mean(self, outcome: str) -> float:
        return self.stats[outcome].mean

    def scatter(self) -> List[tuple]:
        """(proportion_infected, proportion_schooldays_missed) per run."""
        return [(r["proportion_infected"], r["proportion_schooldays_missed"]) for r in self.table]


def run_row(result: RunResult, scenario_id: str = "") -> dict:
    row = {"scenario_id": scenario_id, "replication": result.replication, "seed": result.seed}
    for col in RUN_COLUMNS[3:]:
        row[col] = getattr(result, col)
    return row


def aggregate(results: Iterable[RunResult], scenario_id: str = "") -> OutcomeSummary:
    rows = sorted((run_row(r, scenario_id) for r in results), key=lambda r: r["replication"])
    if not rows:
        raise MetricsError("cannot aggregate an empty set of runs")
    stats = {o: OutcomeStats.of([r[o] for r in rows]) for o in OUTCOMES}
    return OutcomeSummary(scenario_id, len(rows), stats, rows)


# --- emission ---------------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def runs_csv(summaries: Sequence[OutcomeSummary]) -> str:
    return _csv_text(RUN_COLUMNS, (row for s in summaries for row in s.table))


def summary_csv(summaries: Sequence[OutcomeSummary]) -> str:
    rows = []
    for s in summaries:
        for outcome in OUTCOMES:
            st = s.stats[outcome]
            rows.append({"scenario_id": s.scenario_id, "outcome": outcome, "n": s.n_runs,
                         **{k: getattr(st, k) for k in STATS}})
    return _csv_text(SUMMARY_COLUMNS, rows)


def daily_csv(runs: Dict[str, Sequence[RunResult]]) -> str:
    rows = []
    for sid, results in runs.items():
        for r in sorted(results, key=lambda r: r.replication):
            if r.daily_infected is None:
                continue
            for day in range(len(r.daily_infected)):
                rows.append({"scenario_id": sid, "replication": r.replication, "day": day,
                             "infected": int(r.daily_infected[day]), "isolated": int(r.daily_isolated[day]),
                             "infectious_attending": int(r.daily_infectious_attending[day])})
    return _csv_text(DAILY_COLUMNS, rows)


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def emit_outputs(summaries: Sequence[OutcomeSummary], results: Dict[str, Sequence[RunResult]], out_dir,
                 resolved: Optional[dict] = None, daily: bool = False) -> List[Path]:
    """Write runs.csv, summary.csv, scenario.resolved.json and optionally daily.csv."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {out}: {exc.strerror}") from None
    written = []
    for name, text in (("runs.csv", runs_csv(summaries)), ("summary.csv", summary_csv(summaries))):
        _write(out / name, text)
        written.append(out / name)
    if resolved is not None:
        _write(out / "scenario.resolved.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n")
        written.append(out / "scenario.resolved.json")
    if daily:
        _write(out / "daily.csv", daily_csv(results))
        written.append(out / "daily.csv")
    return written


def read_runs_csv(path) -> List[dict]:
    """Parse runs.csv back into typed rows."""
    ints = {"replication", "seed", "n_infected", "n_external"}
    with open(path, newline="") as fh:
        return [{k: (v if k == "scenario_id" else int(v) if k in ints else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]
