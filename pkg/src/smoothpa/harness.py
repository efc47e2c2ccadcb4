"""Experiment configuration, seeded batch execution, sweeps, and scaling fits.

A single JSON config describes one sweep: universe, family, adversary, learner
spec(s), horizon(s), smoothness value(s), repetitions, and a base seed. Every
(cell, repetition) derives its own seed by stable hashing, so cells reproduce
independently and byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .adversary import adversary_from_spec
from .core import CSV_HEADER, ContextUniverse, RegretRecord, format_records_csv, run_game
from .errors import ConfigError
from .hypotheses import ComparatorTracker, RegionFamily
from .learners import learner_from_spec

THREADS_ENV = "SMOOTHPA_THREADS"


@dataclass
class ExperimentConfig:
    universe: int
    family: dict
    adversary: dict
    learners: list[dict]
    horizons: list[int]
    sigmas: list[float]
    repetitions: int
    base_seed: int
    output_dir: Optional[str] = None

    @property
    def cells(self) -> list[tuple[dict, int, float]]:
        """Sweep cells in deterministic order: learner-major, then T, then sigma."""
        return [(ls, t, s) for ls in self.learners for t in self.horizons
                for s in self.sigmas]


def _as_list(value, name: str, cast):
    if isinstance(value, (list, tuple)):
        out = [cast(v) for v in value]
        if not out:
            raise ConfigError(f"{name}: empty list")
        return out
    return [cast(value)]


def parse_config(obj: Union[dict, str, Path]) -> ExperimentConfig:
    """Validate a config document; error messages carry the offending field path."""
    if isinstance(obj, (str, Path)):
        try:
            obj = json.loads(Path(obj).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {obj}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
    if not isinstance(obj, dict):
        raise ConfigError("config: must be a JSON object")

    def need(key):
        if key not in obj:
            raise ConfigError(f"{key}: missing")
        return obj[key]

    universe = int(need("universe"))
    if universe < 1:
        raise ConfigError(f"universe: {universe} must be >= 1")
    family = need("family")
    if not isinstance(family, dict):
        raise ConfigError("family: must be an object")
    adversary = need("adversary")
    if not isinstance(adversary, dict):
        raise ConfigError("adversary: must be an object")

    sweep = obj.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("sweep: must be an object")
    learners = sweep.get("learner", obj.get("learner"))
    if learners is None:
        raise ConfigError("learner: missing")
    if isinstance(learners, dict):
        learners = [learners]
    if not isinstance(learners, list) or not all(isinstance(v, dict) for v in learners):
        raise ConfigError("learner: must be an object or list of objects")
    horizons = _as_list(sweep.get("T", obj.get("T")), "T", int)
    if any(t < 1 for t in horizons):
        raise ConfigError("T: horizons must be >= 1")
    sigmas = _as_list(sweep.get("sigma", obj.get("sigma")), "sigma", float)
    if any(not 0.0 < s <= 1.0 for s in sigmas):
        raise ConfigError("sigma: values must be in (0, 1]")
    repetitions = int(obj.get("repetitions", 1))
    if repetitions < 1:
        raise ConfigError(f"repetitions: {repetitions} must be >= 1")
    base_seed = int(obj.get("base_seed", 0))
    output_dir = obj.get("output_dir")
    return ExperimentConfig(universe, family, adversary, learners, horizons,
                            sigmas, repetitions, base_seed, output_dir)


def derive_seed(base_seed: int, cell_key, rep: int) -> int:
    """Stable 63-bit seed from (base seed, cell coordinates, repetition index)."""
    payload = json.dumps([base_seed, cell_key, rep], sort_keys=True,
                         separators=(",", ":")).encode()
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class CellResult:
    records: list[RegretRecord]
    final_regret: float
    final_loss: float


@dataclass
class SweepSummary:
    """Aggregates per cell: repetition-level final regrets and their moments."""

    config: dict
    cells: list[dict]
    fits: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "cells": self.cells,
                           "fits": self.fits}, sort_keys=True, indent=2)


def _run_one(config: ExperimentConfig, cell_idx: int, learner_spec: dict, t: int,
             sigma: float, rep: int) -> CellResult:
    universe = ContextUniverse(config.universe)
    family = RegionFamily.from_spec(config.family)
    learner = learner_from_spec(learner_spec, family, universe, t, sigma)
    adversary = adversary_from_spec(config.adversary, sigma=sigma, family=family)
    cell_key = {"learner": learner_spec, "T": t, "sigma": sigma}
    seed = derive_seed(config.base_seed, cell_key, rep)
    run_id = f"c{cell_idx:03d}r{rep:03d}"
    trace = run_game(learner, adversary, universe, t, seed, run_id=run_id)

    tracker = ComparatorTracker(family)
    enriched = []
    for rec, x, y in zip(trace.records, trace.xs, trace.ys):
        comp = tracker.update(int(x), int(y))
        enriched.append(RegretRecord(
            run_id=rec.run_id, seed=rec.seed, t=rec.t,
            learner_loss=rec.learner_loss, cum_learner_loss=rec.cum_learner_loss,
            cum_comparator_loss=comp, cum_regret=rec.cum_learner_loss - comp,
            learner=rec.learner, adversary=rec.adversary,
        ))
    last = enriched[-1]
    return CellResult(enriched, last.cum_regret, last.cum_learner_loss)


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: not an integer: {raw!r}") from None


def run(config: Union[dict, str, Path, ExperimentConfig],
        output_dir: Optional[Union[str, Path]] = None) -> SweepSummary:
    """Execute the sweep; write one records CSV per cell plus summary.json.

    Outputs are byte-identical across runs of the same config. Trajectories may
    execute on a thread pool (capped by SMOOTHPA_THREADS) but results merge in
    cell order; an interrupt still leaves complete, parseable CSV prefixes.
    """
    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config)
    out = Path(output_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)

    cells = cfg.cells
    summary_cells: list[dict] = []

    def flush_cell(ci: int, results: list[CellResult]) -> None:
        lines = []
        for res in results:
            lines.extend(format_records_csv(res.records).splitlines(keepends=True)[1:])
        path = out / f"records_cell{ci:03d}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.writelines(lines)
            fh.flush()

    pool = ThreadPoolExecutor(max_workers=_max_workers())
    try:
        futures = {}
        for ci, (ls, t, s) in enumerate(cells):
            for rep in range(cfg.repetitions):
                futures[(ci, rep)] = pool.submit(_run_one, cfg, ci, ls, t, s, rep)
        for ci, (ls, t, s) in enumerate(cells):
            done: list[CellResult] = []
            try:
                for rep in range(cfg.repetitions):
                    done.append(futures[(ci, rep)].result())
            except BaseException:
                if done:
                    flush_cell(ci, done)
                raise
            flush_cell(ci, done)
            regrets = np.array([r.final_regret for r in done])
            summary_cells.append({
                "cell": ci, "learner": ls, "T": t, "sigma": s,
                "final_regrets": [float(v) for v in regrets],
                "mean_final_regret": float(regrets.mean()),
                "stddev_final_regret": float(regrets.std(ddof=1)) if len(regrets) > 1 else 0.0,
                "mean_final_loss": float(np.mean([r.final_loss for r in done])),
            })
    except BaseException:
        pool.shutdown(wait=False, cancel_futures=True)
        raise
    else:
        pool.shutdown(wait=True)

    summary = SweepSummary(
        config={"universe": cfg.universe, "family": cfg.family, "adversary": cfg.adversary,
                "learner": cfg.learners, "T": cfg.horizons, "sigma": cfg.sigmas,
                "repetitions": cfg.repetitions, "base_seed": cfg.base_seed},
        cells=summary_cells,
    )
    try:
        summary.fits = fit_scaling(summary)
    except ConfigError:
        summary.fits = {}
    (out / "summary.json").write_text(summary.to_json() + "\n", encoding="utf-8")
    return summary


def _slopes(ts: np.ndarray, regrets: np.ndarray) -> tuple[float, float, float, float]:
    lnt = np.log(ts)
    loglog = np.polyfit(lnt, np.log(np.maximum(regrets, 1e-9)), 1)
    linlog = np.polyfit(lnt, regrets, 1)
    return float(loglog[0]), float(loglog[1]), float(linlog[0]), float(linlog[1])


def fit_scaling(summary: Union[SweepSummary, dict], n_boot: int = 200,
                seed: int = 0) -> dict:
    """Least-squares exponents of regret vs horizon, with bootstrap CIs.

    Cells group by (learner, sigma); each group with >= 4 distinct horizons
    yields a log-log slope (regret ~ T^b) and a regret ~ a + b ln T fit.
    Bootstrap resamples repetitions within each cell.
    """
    cells = summary.cells if isinstance(summary, SweepSummary) else summary["cells"]
    groups: dict[str, list[dict]] = {}
    for cell in cells:
        key = json.dumps({"learner": cell["learner"], "sigma": cell["sigma"]},
                         sort_keys=True)
        groups.setdefault(key, []).append(cell)

    rng = np.random.default_rng(seed)
    fitted = []
    for key, group in sorted(groups.items()):
        group = sorted(group, key=lambda c: c["T"])
        ts = np.array([c["T"] for c in group], dtype=float)
        if len(np.unique(ts)) < 4:
            continue
        means = np.array([c["mean_final_regret"] for c in group])
        ll_b, ll_a, lt_b, lt_a = _slopes(ts, means)
        boot_ll, boot_lt = [], []
        for _ in range(n_boot):
            resampled = []
            for c in group:
                vals = np.asarray(c["final_regrets"])
                resampled.append(vals[rng.integers(0, len(vals), len(vals))].mean())
            b_ll, _, b_lt, _ = _slopes(ts, np.asarray(resampled))
            boot_ll.append(b_ll)
            boot_lt.append(b_lt)
        meta = json.loads(key)
        fitted.append({
            "learner": meta["learner"], "sigma": meta["sigma"],
            "T": [int(v) for v in ts],
            "mean_regret": [float(v) for v in means],
            "loglog_slope": ll_b, "loglog_intercept": ll_a,
            "loglog_ci": [float(np.percentile(boot_ll, 2.5)),
                          float(np.percentile(boot_ll, 97.5))],
            "lnT_slope": lt_b, "lnT_intercept": lt_a,
            "lnT_ci": [float(np.percentile(boot_lt, 2.5)),
                       float(np.percentile(boot_lt, 97.5))],
        })
    if not fitted:
        raise ConfigError("fit: need >= 4 sweep points on the T axis in some group")
    return {"groups": fitted}
