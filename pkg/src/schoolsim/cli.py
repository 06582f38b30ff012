"""Command line entry point: ``schoolsim <command> ...`` (or ``python3 -m schoolsim``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibration import (CalibrationBase, CalibrationError, EtaCalibrationSpec, GammaCalibrationSpec,
                          calibrate_eta, fit_gamma_curve)
from .calibration_tables import base_for_setting, setting_for
from .config import ConfigError, parse_config
from .disease import (DiseaseParams, HeavyTailNoiseParams, SamplingError, sample_heavy_tail_noise,
                      sample_trajectories)
from .engine import run_scenario
from .metrics import _csv_text, aggregate, emit_outputs
from .population import ConfigurationError, SchoolConfig, build_school, expected_adjacency
from .rng import substream
from .testing import DEFAULT_BETA_TEST, DEFAULT_C_TEST, LfdModelParams, lfd_sensitivity_log10

log = logging.getLogger("schoolsim")


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --- commands ---------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    grid = parse_config(args.config)
    summaries, runs, resolved = [], {}, []
    for cell in grid:
        cfg = cell.config
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
            cell.config = cfg
        t = time.time()
        results = run_scenario(cfg, replications=args.replications, threads=args.threads)
        s = aggregate(results, cell.scenario_id)
        summaries.append(s)
        runs[cell.scenario_id] = results
        resolved.append(cell.resolved_dict())
        log.info("%s: %d runs in %.1fs, median infected %.4f, median missed %.4f", cell.scenario_id,
                 len(results), time.time() - t, s.median("proportion_infected"),
                 s.median("proportion_schooldays_missed"))
    doc = resolved[0] if len(resolved) == 1 else {"name": grid.name, "cells": resolved}
    for path in emit_outputs(summaries, runs, args.out, resolved=doc, daily=args.daily):
        log.info("wrote %s", path)
    return 0


def cmd_calibrate_gamma(args) -> int:
    setting = setting_for(args.lli, args.heavy_tails)
    base: CalibrationBase = base_for_setting(setting)
    spec = GammaCalibrationSpec.for_lli(args.lli, args.points, populations=args.populations,
                                        resamples=args.resamples, seed=args.seed,
                                        asymptomatic_fraction=args.asymptomatic_fraction)
    fit = fit_gamma_curve(spec, base)
    report = {"input": {"lli": args.lli, "heavy_tails": args.heavy_tails, "points": args.points,
                        "populations": args.populations, "resamples": args.resamples, "seed": args.seed,
                        "asymptomatic_fraction": args.asymptomatic_fraction},
              "fit": fit.to_dict(),
              "gamma": {str(r): fit.invert(r) for r in args.rs}}
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_calibrate_eta(args) -> int:
    lfd = LfdModelParams(beta_test=args.beta_test, c_test=args.c_test, beta_u=args.beta_u)
    disease = DiseaseParams(lli=args.lli)
    report = {"input": {"beta_test": args.beta_test, "c_test": args.c_test, "beta_u": args.beta_u,
                        "lli": args.lli, "n_trajectories": args.n, "seed": args.seed},
              "eta": {}}
    for x in args.x:
        spec = EtaCalibrationSpec(n_trajectories=args.n, target_x=x, seed=args.seed)
        report["eta"][str(x)] = calibrate_eta(spec, lfd, disease)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_dump_trajectories(args) -> int:
    disease = DiseaseParams(lli=args.lli, p_symptomatic=1.0 - args.asymptomatic_fraction)
    rng = substream(args.seed, 0, "disease")
    batch = sample_trajectories(disease, args.n, rng)
    noise = HeavyTailNoiseParams(enabled=args.heavy_tails)
    hi = int(noise.window[1])
    grid = batch.log10_grid(max(args.days, hi + 1))
    if args.heavy_tails:
        for i in range(args.n):
            base = grid[i, : hi + 1]
            path = sample_heavy_tail_noise(noise, substream(args.seed, 0, "noise", i), base)
            grid[i, : hi + 1] = np.where(np.isfinite(base), np.clip(base + path, 0, noise.max_log10_vl), -np.inf)
    onset = batch.onset_offsets()
    rows = []
    for i in range(args.n):
        for day in range(args.days):
            v = grid[i, day]
            rows.append({"trajectory": i, "day": day, "symptomatic": int(batch.symptomatic[i]),
                         "onset_day": int(onset[i]), "log10_vl": float(v) if np.isfinite(v) else "",
                         "vl": float(10.0 ** v) if np.isfinite(v) else 0.0})
    _emit(_csv_text(("trajectory", "day", "symptomatic", "onset_day", "log10_vl", "vl"), rows), args.out)
    return 0


def cmd_dump_adjacency(args) -> int:
    layout = build_school(SchoolConfig(bubbles_per_class=args.bubbles_per_class))
    adj = expected_adjacency(layout)
    rows = [{"pupil_a": a, "pupil_b": b, "bubble_a": int(layout.bubble_of[a]), "bubble_b": int(layout.bubble_of[b]),
             "class_a": int(layout.class_of[a]), "class_b": int(layout.class_of[b]), "expected_contacts": float(adj[a, b])}
            for a in range(layout.n_pupils) for b in range(a + 1, layout.n_pupils)]
    _emit(_csv_text(tuple(rows[0]), rows), args.out)
    return 0


def cmd_dump_sensitivity_curve(args) -> int:
    lfd = LfdModelParams(beta_test=args.beta_test, c_test=args.c_test)
    etas = list(args.eta or [])
    labels = [f"eta={e}" for e in etas]
    for x in args.x or []:
        etas.append(calibrate_eta(EtaCalibrationSpec(target_x=x, seed=args.seed), lfd, DiseaseParams(lli=args.lli)))
        labels.append(f"x={x}")
    if not etas:
        etas, labels = [1.0], ["eta=1.0"]
    grid = np.linspace(args.min_log10, args.max_log10, args.points)
    rows = [{"curve": lab, "eta": eta, "log10_vl": float(g), "sensitivity": float(lfd_sensitivity_log10(replace(lfd, eta=eta), g))}
            for lab, eta in zip(labels, etas) for g in grid]
    _emit(_csv_text(("curve", "eta", "log10_vl", "sensitivity"), rows), args.out)
    return 0


# --- parser -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="schoolsim", description="School test-and-isolate policy simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run every scenario cell of a config file")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--daily", action="store_true", help="also write daily.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate-gamma", help="fit the R_S(gamma) line and invert it")
    p.add_argument("--rs", type=float, nargs="+", default=[1.5, 3.0, 6.0])
    p.add_argument("--lli", type=float, default=1e6)
    p.add_argument("--heavy-tails", action="store_true")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--populations", type=int, default=1000)
    p.add_argument("--resamples", type=int, default=10)
    p.add_argument("--asymptomatic-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_calibrate_gamma)

    p = sub.add_parser("calibrate-eta", help="solve eta for target mean pre-symptomatic sensitivities")
    p.add_argument("--x", type=float, nargs="+", default=[0.4, 0.6, 0.8])
    p.add_argument("--beta-test", type=float, default=DEFAULT_BETA_TEST)
    p.add_argument("--c-test", type=float, default=DEFAULT_C_TEST)
    p.add_argument("--beta-u", type=float, default=0.0)
    p.add_argument("--lli", type=float, default=1e6)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_calibrate_eta)

    p = sub.add_parser("dump-trajectories", help="sample viral load trajectories to CSV")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--days", type=int, default=21)
    p.add_argument("--lli", type=float, default=1e6)
    p.add_argument("--asymptomatic-fraction", type=float, default=0.5)
    p.add_argument("--heavy-tails", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_dump_trajectories)

    p = sub.add_parser("dump-adjacency", help="expected daily risk-contacts per pupil pair")
    p.add_argument("--bubbles-per-class", type=int, default=3)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_dump_adjacency)

    p = sub.add_parser("dump-sensitivity-curve", help="LFD sensitivity against log10 viral load")
    p.add_argument("--eta", type=float, nargs="*")
    p.add_argument("--x", type=float, nargs="*")
    p.add_argument("--beta-test", type=float, default=DEFAULT_BETA_TEST)
    p.add_argument("--c-test", type=float, default=DEFAULT_C_TEST)
    p.add_argument("--lli", type=float, default=1e6)
    p.add_argument("--min-log10", type=float, default=0.0)
    p.add_argument("--max-log10", type=float, default=12.0)
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_dump_sensitivity_curve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, CalibrationError, SamplingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
