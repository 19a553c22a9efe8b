"""Experiment runner: repeated seeded runs in both modes, presets, CSV output."""

from __future__ import annotations

import contextlib
import csv
import gc
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import __version__
from .adversary import audit_claims
from .config import config_from_dict, config_to_dict, merge
from .engine import IterationOutcome, simulate_local, simulate_shared
from .ledger import Channel, LedgerStore, TransactionRecord
from .model import Mode, ScenarioConfig
from .privacy import perturb_count, privacy_sweep, write_privacy_csv
from .selection import (WorkerAssessment, assess_worker, audit_from_record, evaluate_lambda,
                        select_workers, write_assessments_csv)


class InsufficientData(ValueError):
    pass


class UnknownPreset(KeyError):
    pass


class IoFailure(OSError):
    pass


def summarize(rows: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and Student-t 95% confidence half-width."""
    x = np.asarray(rows, dtype=np.float64)
    if x.size < 2:
        raise InsufficientData(f"need at least 2 values, got {x.size}")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    half = float(stats.t.ppf(0.975, x.size - 1)) * sd / math.sqrt(x.size)
    return mean, half


@dataclass
class RepetitionRun:
    seed: int
    mode: Mode
    outcomes: List[IterationOutcome]
    ledger: Optional[LedgerStore] = None
    assessments: Tuple[WorkerAssessment, ...] = ()
    selections: List[Tuple[str, ...]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    scenario: str
    repetitions: List[Tuple[int, str, int, float]]
    summary: Dict[Tuple[str, object], Tuple[int, float, float]]
    uplift_percent: Optional[float]
    runs: List[RepetitionRun] = field(default_factory=list, repr=False)

    def mean(self, mode):
        mode = Mode(mode).value
        return float(np.mean([r[3] for r in self.repetitions if r[1] == mode]))


@contextlib.contextmanager
def _gc_paused():
    # event logs are large and acyclic; repeated full collections over them
    # cost more than the simulation itself
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


def run_repetition(cfg: ScenarioConfig, seed: int, mode: Mode) -> RepetitionRun:
    """All iterations of one seeded execution in one mode."""
    mode = Mode(mode)
    pool = [w.device_id for w in cfg.workers]
    by_id = {w.device_id: w for w in cfg.workers}
    noise = {w: np.random.default_rng(np.random.SeedSequence([seed, 1, i]))
             for i, w in enumerate(pool)}
    ledger = LedgerStore() if mode is Mode.BDMEC else None
    outcomes, selections = [], []
    clock = 0
    for it in range(cfg.iterations):
        task = cfg.task_for(it, seed)
        if mode is Mode.BDMEC:
            decision = select_workers(pool, ledger, cfg.selection_policy)
            chosen = [by_id[w] for w in decision.selected]
            overhead = cfg.ledger_query_overhead_s
        else:
            chosen = list(cfg.workers)
            overhead = 0.0
        selections.append(tuple(w.device_id for w in chosen))
        t1 = simulate_local(task, cfg.delegator)
        out = simulate_shared(task, cfg.delegator, chosen, overhead, iteration_id=it,
                              slack_factor=cfg.slack_factor, time_1_s=t1)
        outcomes.append(out)
        if ledger is None:
            continue
        for w in chosen:
            st = out.worker_stats[w.device_id]
            report = audit_claims(st.assigned_ids, st, w.device_id)
            past = [audit_from_record(r)
                    for r in ledger.query_worker_history(Channel.DELEGATOR, w.device_id)]
            lam = evaluate_lambda(past + [report], cfg.selection_policy)
            base = dict(iteration_id=it, task_id=task.task_id, worker_id=w.device_id,
                        speed_gain=out.speed_gain, steal_chunk_size=task.steal_chunk_size,
                        location=w.location, lambda_=lam, task_complexity=task.complexity,
                        timestamp=clock, total_jobs=task.n_jobs,
                        count_mismatch=report.count_mismatch,
                        id_fabrication=report.id_fabrication,
                        incomplete_chunks=report.incomplete_chunks,
                        deadline_violations=report.deadline_violations)
            clock += 1
            ledger.append_transaction(Channel.DELEGATOR,
                                      TransactionRecord(jobs_executed=st.jobs_verified, **base))
            noisy = perturb_count(st.jobs_verified, cfg.privacy, noise[w.device_id])
            ledger.append_transaction(Channel.WORKER,
                                      TransactionRecord(jobs_executed=noisy, **base))
    assessments = ()
    if ledger is not None:
        assessments = tuple(
            assess_worker(w, ledger.query_worker_history(Channel.DELEGATOR, w),
                          cfg.selection_policy)
            for w in pool)
    return RepetitionRun(seed, mode, outcomes, ledger, assessments, selections)


def run_scenario(config: ScenarioConfig, repetitions: int,
                 modes: Optional[Sequence[Mode]] = None) -> ExperimentResult:
    """Repeat the scenario with seeds ``rng_seed + r``, by default in both modes."""
    if repetitions < 1:
        raise ValueError("repetitions must be ≥ 1")
    modes = [Mode.BASELINE, Mode.BDMEC] if modes is None else [Mode(m) for m in modes]
    rows, runs = [], []
    for mode in modes:
        for r in range(repetitions):
            seed = config.rng_seed + r
            with _gc_paused():
                run = run_repetition(config, seed, mode)
            runs.append(run)
            rows.extend((seed, mode.value, o.iteration_id, o.speed_gain) for o in run.outcomes)

    summary = {}
    for mode in modes:
        vals = [row for row in rows if row[1] == mode.value]
        groups = [(it, [v[3] for v in vals if v[2] == it]) for it in range(config.iterations)]
        groups.append(("all", [v[3] for v in vals]))
        for key, xs in groups:
            if len(xs) >= 2:
                m, h = summarize(xs)
            else:
                m, h = float(xs[0]), float("nan")
            summary[(mode.value, key)] = (len(xs), m, h)

    uplift = None
    if Mode.BASELINE in modes and Mode.BDMEC in modes:
        b = summary[(Mode.BASELINE.value, "all")][1]
        d = summary[(Mode.BDMEC.value, "all")][1]
        uplift = (d - b) / b * 100.0
    return ExperimentResult(config.name, rows, summary, uplift, runs)


# -- presets ----------------------------------------------------------------
#
# Three identical fast phones and one much slower one. Rates and links are
# free parameters picked to give the intended regimes, not measurements.

def _devices(delay_worker=False):
    link = {"bandwidth_bps": 40e6, "link_latency_s": 0.5}
    delegator = {"device_id": "delegator", "processing_rate": 10.0, "location": "lab-desk",
                 "bandwidth_bps": 40e6, "link_latency_s": 0.0}
    workers = [
        {"device_id": "pixel-1", "processing_rate": 10.0, "location": "lab-a", **link},
        {"device_id": "pixel-2", "processing_rate": 10.0, "location": "lab-b", **link},
        {"device_id": "pixel-3", "processing_rate": 10.0, "location": "lab-c", **link},
        {"device_id": "a21", "processing_rate": 0.7, "location": "lab-d", **link},
    ]
    for w in workers:
        w["behavior"] = {"kind": "honest"}
    if delay_worker:
        workers[1]["behavior"] = {"kind": "delay", "delay_s": 50.0}
    return delegator, workers


def _sim_preset(name, workload, delay_worker=False):
    delegator, workers = _devices(delay_worker)
    return {
        "preset": name, "kind": "simulation", "repetitions": 5,
        "config": {
            "name": name, "iterations": 5, "mode": "BdMEC", "rng_seed": 0,
            "ledger_query_overhead_s": 0.2, "slack_factor": 3.0,
            "delegator": delegator, "workers": workers, "workload": workload,
            "privacy": {"epsilon": 0.1, "sensitivity": 1.0},
            "selection": {"cold_start": "Optimistic", "eta": 0.01, "lambda_window": 5,
                          "failure_threshold": 2},
        },
    }


_LARGE_JOBS = {"n_jobs": 1000, "payload_bytes": [1_000_000, 2_000_000],
               "compute_cost": [0.6, 1.0], "chunk": 40}
_SMALL_JOBS = {"n_jobs": 4000, "payload_bytes": [10_000, 700_000],
               "compute_cost": [0.03, 0.07], "chunk": 40}

PRESETS = {
    "speed-gain": lambda: _sim_preset("speed-gain", _LARGE_JOBS),
    "malicious": lambda: _sim_preset("malicious", _LARGE_JOBS, delay_worker=True),
    "small-jobs": lambda: _sim_preset("small-jobs", _SMALL_JOBS),
    "privacy-tradeoff": lambda: {
        "preset": "privacy-tradeoff", "kind": "privacy",
        "epsilons": [0.01, 0.1, 0.5, 1.0, 2.0], "trials": 10000, "seed": 0,
        "sensitivity": 1.0,
        # true job counts sized so R at epsilon=0.1 lands near 3.16% / 4.6%
        "true_counts": {"worker-1": 316, "worker-2": 217},
    },
}


def preset_spec(name: str, overrides: Optional[dict] = None) -> dict:
    """Resolved run description for ``name``.

    ``overrides`` may set top-level keys (``repetitions``, ``trials``,
    ``seed``, ``epsilons``...) and anything under ``config``; the shortcuts
    ``iterations`` and ``rng_seed`` are routed into ``config`` for simulation
    presets.
    """
    if name not in PRESETS:
        raise UnknownPreset(name)
    spec = PRESETS[name]()
    overrides = dict(overrides or {})
    if spec["kind"] == "simulation":
        cfg_over = dict(overrides.pop("config", {}))
        for k in ("iterations", "rng_seed", "ledger_query_overhead_s", "slack_factor"):
            if k in overrides:
                cfg_over[k] = overrides.pop(k)
        if "seed" in overrides:
            cfg_over["rng_seed"] = overrides.pop("seed")
        spec["config"] = merge(spec["config"], cfg_over)
        # validate now so manifests only ever hold runnable configs
        spec["config"] = config_to_dict(config_from_dict(spec["config"]))
    unknown = set(overrides) - set(spec)
    if unknown:
        raise KeyError(f"unknown override(s): {', '.join(sorted(unknown))}")
    spec.update(overrides)
    return spec


SUMMARY_COLUMNS = ["scenario", "mode", "iteration", "n", "mean_speed_gain", "ci95_halfwidth"]


def _fmt(x):
    return repr(float(x))


def write_results(result: ExperimentResult, out: Path):
    files = []
    p = out / "results.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "mode", "seed", "iteration", "speed_gain"])
        for seed, mode, it, sg in result.repetitions:
            w.writerow([result.scenario, mode, seed, it, _fmt(sg)])
    files.append(p)

    p = out / "summary.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for (mode, it), (n, m, h) in result.summary.items():
            w.writerow([result.scenario, mode, it, n, _fmt(m), _fmt(h)])
    files.append(p)

    if result.uplift_percent is not None:
        p = out / "uplift.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "baseline_mean", "bdmec_mean", "uplift_percent"])
            w.writerow([result.scenario, _fmt(result.mean(Mode.BASELINE)),
                        _fmt(result.mean(Mode.BDMEC)), _fmt(result.uplift_percent)])
        files.append(p)

    bd = [r for r in result.runs if r.mode is Mode.BDMEC]
    if bd:
        p = out / "assessments.csv"
        write_assessments_csv([(r.seed, a) for r in bd for a in r.assessments], p)
        files.append(p)
        p = out / "selections.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "iteration", "selected"])
            for r in bd:
                for it, sel in enumerate(r.selections):
                    w.writerow([r.seed, it, " ".join(sel)])
        files.append(p)
        ldir = out / "ledgers"
        ldir.mkdir(exist_ok=True)
        for r in bd:
            p = ldir / f"ledger_seed{r.seed}.jsonl"
            r.ledger.export(p)
            files.append(p)
    return files


def run_spec(spec: dict, out_path) -> List[Path]:
    """Execute a resolved preset description and write its outputs + manifest."""
    out = Path(out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if spec["kind"] == "simulation":
            cfg = config_from_dict(spec["config"])
            reps = int(spec["repetitions"])
            result = run_scenario(cfg, reps)
            files = write_results(result, out)
            seeds = [cfg.rng_seed + r for r in range(reps)]
        elif spec["kind"] == "privacy":
            rows = privacy_sweep(spec["true_counts"], spec["epsilons"], int(spec["trials"]),
                                 int(spec["seed"]), float(spec.get("sensitivity", 1.0)))
            p = out / "privacy.csv"
            write_privacy_csv(rows, p)
            files = [p]
            seeds = [int(spec["seed"])]
        else:
            raise ValueError(f"unknown run kind {spec['kind']!r}")
        manifest = dict(spec, seeds=seeds, version=__version__)
        p = out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        files.append(p)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return files


def run_preset(name: str, overrides: Optional[dict] = None, out_path=".") -> List[Path]:
    return run_spec(preset_spec(name, overrides), out_path)


def replay_manifest(manifest_path, out_path) -> List[Path]:
    spec = json.loads(Path(manifest_path).read_text())
    spec.pop("seeds", None)
    spec.pop("version", None)
    return run_spec(spec, out_path)
