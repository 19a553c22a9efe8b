"""Scenario configuration files.

TOML and JSON are both accepted and share one schema (see README). Every
table is closed: an unknown key is an error.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .model import (CountInflator, DelayInjector, DeviceProfile, Honest, IdFabricator, JobSpec,
                    Mode, PrivacyParams, ScenarioConfig, SelectionPolicy, TaskSpec, WorkloadSpec,
                    ColdStart, DEFAULT_RESULT_BYTES, validate_scenario)


class ConfigError(ValueError):
    pass


_TOP = {"name", "iterations", "mode", "ledger_query_overhead_s", "rng_seed", "slack_factor",
        "delegator", "workers", "tasks", "workload", "privacy", "selection"}
_DEVICE = {"device_id", "processing_rate", "bandwidth_bps", "link_latency_s", "behavior", "location"}
_BEHAVIOR = {"honest": set(), "delay": {"delay_s"}, "inflate": {"extra_jobs"},
             "fabricate": {"fabricated_ids"}}
_TASK = {"task_id", "jobs", "steal_chunk_size", "complexity"}
_JOB = {"job_id", "payload_bytes", "compute_cost", "result_bytes"}
_WORKLOAD = {"n_jobs", "payload_bytes", "compute_cost", "chunk", "complexity", "result_bytes"}
_PRIVACY = {"epsilon", "sensitivity"}
_SELECTION = {"cold_start", "eta", "lambda_window", "failure_threshold"}


def _closed(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a table")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _behavior(d, where):
    if d is None:
        return Honest()
    if isinstance(d, str):
        d = {"kind": d}
    kind = d.get("kind")
    if kind not in _BEHAVIOR:
        raise ConfigError(f"{where}.kind: must be one of {sorted(_BEHAVIOR)}")
    _closed(d, _BEHAVIOR[kind] | {"kind"}, where)
    try:
        if kind == "delay":
            return DelayInjector(float(d["delay_s"]))
        if kind == "inflate":
            return CountInflator(int(d["extra_jobs"]))
        if kind == "fabricate":
            return IdFabricator(int(d["fabricated_ids"]))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing {exc.args[0]}") from None
    return Honest()


def _device(d, where):
    _closed(d, _DEVICE, where)
    try:
        return DeviceProfile(
            device_id=str(d["device_id"]),
            processing_rate=float(d["processing_rate"]),
            bandwidth_bps=float(d.get("bandwidth_bps", 20e6)),
            link_latency_s=float(d.get("link_latency_s", 0.0)),
            behavior=_behavior(d.get("behavior"), f"{where}.behavior"),
            location=str(d.get("location", "")),
        )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing {exc.args[0]}") from None


def _task(d, where):
    _closed(d, _TASK, where)
    jobs = []
    for i, j in enumerate(d.get("jobs", [])):
        _closed(j, _JOB, f"{where}.jobs[{i}]")
        jobs.append(JobSpec(int(j["job_id"]), int(j["payload_bytes"]), float(j["compute_cost"]),
                            int(j.get("result_bytes", DEFAULT_RESULT_BYTES))))
    cx = d.get("complexity")
    return TaskSpec(int(d.get("task_id", 0)), tuple(jobs), int(d["steal_chunk_size"]),
                    None if cx is None else float(cx))


def config_from_dict(d) -> ScenarioConfig:
    _closed(d, _TOP, "config")
    if "delegator" not in d:
        raise ConfigError("config: missing delegator")
    workload = None
    if "workload" in d:
        w = d["workload"]
        _closed(w, _WORKLOAD, "workload")
        cx = w.get("complexity")
        workload = WorkloadSpec(
            n_jobs=int(w["n_jobs"]),
            payload_bytes=tuple(int(v) for v in w["payload_bytes"]),
            compute_cost=tuple(float(v) for v in w["compute_cost"]),
            chunk=int(w["chunk"]),
            complexity=None if cx is None else float(cx),
            result_bytes=int(w.get("result_bytes", DEFAULT_RESULT_BYTES)))
    p = d.get("privacy", {})
    _closed(p, _PRIVACY, "privacy")
    s = d.get("selection", {})
    _closed(s, _SELECTION, "selection")
    try:
        mode = Mode(d.get("mode", Mode.BDMEC.value))
        cold = ColdStart(s.get("cold_start", ColdStart.OPTIMISTIC.value))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = ScenarioConfig(
        delegator=_device(d["delegator"], "delegator"),
        workers=tuple(_device(w, f"workers[{i}]") for i, w in enumerate(d.get("workers", []))),
        tasks=tuple(_task(t, f"tasks[{i}]") for i, t in enumerate(d.get("tasks", []))),
        iterations=int(d.get("iterations", 1)),
        mode=mode,
        privacy=PrivacyParams(float(p.get("epsilon", 0.1)), float(p.get("sensitivity", 1.0))),
        selection_policy=SelectionPolicy(cold, float(s.get("eta", 0.01)),
                                         int(s.get("lambda_window", 5)),
                                         int(s.get("failure_threshold", 2))),
        ledger_query_overhead_s=float(d.get("ledger_query_overhead_s", 0.2)),
        rng_seed=int(d.get("rng_seed", 0)),
        workload=workload,
        slack_factor=float(d.get("slack_factor", 3.0)),
        name=str(d.get("name", "custom")),
    )
    return validate_scenario(cfg)


def _behavior_dict(b):
    if isinstance(b, DelayInjector):
        return {"kind": "delay", "delay_s": b.delay_s}
    if isinstance(b, CountInflator):
        return {"kind": "inflate", "extra_jobs": b.extra_jobs}
    if isinstance(b, IdFabricator):
        return {"kind": "fabricate", "fabricated_ids": b.fabricated_ids}
    return {"kind": "honest"}


def _device_dict(dev):
    return {"device_id": dev.device_id, "processing_rate": dev.processing_rate,
            "bandwidth_bps": dev.bandwidth_bps, "link_latency_s": dev.link_latency_s,
            "behavior": _behavior_dict(dev.behavior), "location": dev.location}


def config_to_dict(cfg: ScenarioConfig):
    """Inverse of :func:`config_from_dict`; output is JSON-serializable."""
    d = {
        "name": cfg.name,
        "iterations": cfg.iterations,
        "mode": Mode(cfg.mode).value,
        "ledger_query_overhead_s": cfg.ledger_query_overhead_s,
        "rng_seed": cfg.rng_seed,
        "slack_factor": cfg.slack_factor,
        "delegator": _device_dict(cfg.delegator),
        "workers": [_device_dict(w) for w in cfg.workers],
        "privacy": {"epsilon": cfg.privacy.epsilon, "sensitivity": cfg.privacy.sensitivity},
        "selection": {"cold_start": ColdStart(cfg.selection_policy.cold_start).value,
                      "eta": cfg.selection_policy.eta,
                      "lambda_window": cfg.selection_policy.lambda_window,
                      "failure_threshold": cfg.selection_policy.failure_threshold},
    }
    if cfg.tasks:
        d["tasks"] = [{"task_id": t.task_id, "steal_chunk_size": t.steal_chunk_size,
                       "complexity": t.complexity,
                       "jobs": [{"job_id": j.job_id, "payload_bytes": j.payload_bytes,
                                 "compute_cost": j.compute_cost, "result_bytes": j.result_bytes}
                                for j in t.jobs]}
                      for t in cfg.tasks]
    if cfg.workload is not None:
        w = cfg.workload
        d["workload"] = {"n_jobs": w.n_jobs, "payload_bytes": list(w.payload_bytes),
                         "compute_cost": list(w.compute_cost), "chunk": w.chunk,
                         "result_bytes": w.result_bytes}
        if w.complexity is not None:
            d["workload"]["complexity"] = w.complexity
    return d


def merge(base, override):
    """Deep-merge ``override`` into a copy of ``base``; lists are replaced whole."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "behavior":
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_config_dict(path):
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path) -> ScenarioConfig:
    return config_from_dict(read_config_dict(path))
