"""Domain types shared across the simulator, plus scenario validation and
synthetic task generation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

DEFAULT_RESULT_BYTES = 64


class Invalid(ValueError):
    """One or more scenario invariants are violated.

    ``problems`` lists every ``(field, reason)`` pair found; ``field`` and
    ``reason`` mirror the first one.
    """

    def __init__(self, field_name, reason=None, problems=None):
        if problems is None:
            problems = [(field_name, reason)]
        self.problems = list(problems)
        self.field, self.reason = self.problems[0]
        super().__init__("; ".join(f"{f}: {r}" for f, r in self.problems))


class InvalidRange(ValueError):
    pass


# -- behaviours ------------------------------------------------------------


@dataclass(frozen=True)
class Honest:
    kind = "honest"


@dataclass(frozen=True)
class DelayInjector:
    """Holds every result back by ``delay_s`` before returning it."""

    delay_s: float
    kind = "delay"


@dataclass(frozen=True)
class CountInflator:
    """Reports ``extra_jobs`` more completed jobs than it actually ran."""

    extra_jobs: int
    kind = "inflate"


@dataclass(frozen=True)
class IdFabricator:
    """Adds ``fabricated_ids`` job ids it was never assigned to its claims."""

    fabricated_ids: int
    kind = "fabricate"


Behavior = Union[Honest, DelayInjector, CountInflator, IdFabricator]


class Mode(str, enum.Enum):
    BASELINE = "Baseline"
    BDMEC = "BdMEC"


class ColdStart(str, enum.Enum):
    OPTIMISTIC = "Optimistic"
    STRICT = "Strict"


# -- value objects ---------------------------------------------------------


@dataclass(frozen=True)
class JobSpec:
    job_id: int
    payload_bytes: int
    compute_cost: float
    result_bytes: int = DEFAULT_RESULT_BYTES


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    jobs: Tuple[JobSpec, ...]
    steal_chunk_size: int
    complexity: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        if self.complexity is None and self.jobs:
            mean_cost = math.fsum(j.compute_cost for j in self.jobs) / len(self.jobs)
            object.__setattr__(self, "complexity", mean_cost)

    @property
    def n_jobs(self):
        return len(self.jobs)

    def arrays(self):
        """(compute_cost, payload_bytes, result_bytes) as float64 arrays in queue order."""
        cost = np.array([j.compute_cost for j in self.jobs], dtype=np.float64)
        payload = np.array([j.payload_bytes for j in self.jobs], dtype=np.float64)
        result = np.array([j.result_bytes for j in self.jobs], dtype=np.float64)
        return cost, payload, result


@dataclass(frozen=True)
class DeviceProfile:
    device_id: str
    processing_rate: float
    bandwidth_bps: float = 20e6
    link_latency_s: float = 0.0
    behavior: Behavior = field(default_factory=Honest)
    location: str = ""


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float = 0.1
    sensitivity: float = 1.0


@dataclass(frozen=True)
class SelectionPolicy:
    cold_start: ColdStart = ColdStart.OPTIMISTIC
    eta: float = 0.01
    lambda_window: int = 5
    failure_threshold: int = 2


@dataclass(frozen=True)
class WorkloadSpec:
    """Recipe for drawing a fresh task every iteration from the run seed."""

    n_jobs: int
    payload_bytes: Tuple[int, int]
    compute_cost: Tuple[float, float]
    chunk: int
    complexity: Optional[float] = None
    result_bytes: int = DEFAULT_RESULT_BYTES


@dataclass(frozen=True)
class ScenarioConfig:
    delegator: DeviceProfile
    workers: Tuple[DeviceProfile, ...]
    tasks: Tuple[TaskSpec, ...] = ()
    iterations: int = 1
    mode: Mode = Mode.BDMEC
    privacy: PrivacyParams = field(default_factory=PrivacyParams)
    selection_policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    ledger_query_overhead_s: float = 0.2
    rng_seed: int = 0
    workload: Optional[WorkloadSpec] = None
    slack_factor: float = 3.0
    name: str = "custom"

    def task_for(self, iteration, seed):
        """Task executed in ``iteration`` of a run seeded with ``seed``."""
        if self.workload is not None:
            w = self.workload
            sub = int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])
            return generate_task(w.n_jobs, w.payload_bytes, w.compute_cost, w.chunk,
                                 complexity=w.complexity, seed=sub,
                                 result_bytes=w.result_bytes, task_id=iteration)
        return self.tasks[iteration % len(self.tasks)]


# -- validation ------------------------------------------------------------


def _positive(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def _nonneg(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x >= 0


def _check_device(dev, where, problems):
    if not isinstance(dev.device_id, str) or not dev.device_id:
        problems.append((f"{where}.device_id", "must be a non-empty string"))
    if not _positive(dev.processing_rate):
        problems.append((f"{where}.processing_rate", "must be > 0"))
    if not _positive(dev.bandwidth_bps):
        problems.append((f"{where}.bandwidth_bps", "must be > 0"))
    if not _nonneg(dev.link_latency_s):
        problems.append((f"{where}.link_latency_s", "must be >= 0"))
    b = dev.behavior
    if isinstance(b, DelayInjector):
        if not _positive(b.delay_s):
            problems.append((f"{where}.behavior.delay_s", "must be > 0"))
    elif isinstance(b, CountInflator):
        if not isinstance(b.extra_jobs, int) or b.extra_jobs < 1:
            problems.append((f"{where}.behavior.extra_jobs", "must be a positive integer"))
    elif isinstance(b, IdFabricator):
        if not isinstance(b.fabricated_ids, int) or b.fabricated_ids < 1:
            problems.append((f"{where}.behavior.fabricated_ids", "must be a positive integer"))
    elif not isinstance(b, Honest):
        problems.append((f"{where}.behavior", f"unknown behavior {b!r}"))


def _check_task(task, where, problems):
    if not task.jobs:
        problems.append((f"{where}.jobs", "must be non-empty"))
    if not isinstance(task.steal_chunk_size, int) or task.steal_chunk_size < 1:
        problems.append(("steal_chunk_size", "must be ≥ 1"))
    if not _positive(task.complexity if task.complexity is not None else 1.0):
        problems.append((f"{where}.complexity", "must be > 0"))
    seen = set()
    for job in task.jobs:
        if job.job_id in seen:
            problems.append((f"{where}.jobs", f"duplicate job_id {job.job_id}"))
        seen.add(job.job_id)
        if not _positive(job.compute_cost):
            problems.append((f"{where}.jobs[{job.job_id}].compute_cost", "must be > 0"))
        if not isinstance(job.payload_bytes, int) or job.payload_bytes < 0:
            problems.append((f"{where}.jobs[{job.job_id}].payload_bytes", "must be >= 0"))
        if not isinstance(job.result_bytes, int) or job.result_bytes < 0:
            problems.append((f"{where}.jobs[{job.job_id}].result_bytes", "must be >= 0"))


def validate_scenario(config: ScenarioConfig) -> ScenarioConfig:
    """Check every invariant; return a normalized copy or raise :class:`Invalid`."""
    problems = []
    workers = tuple(config.workers)
    tasks = tuple(config.tasks)

    _check_device(config.delegator, "delegator", problems)
    ids = [config.delegator.device_id]
    for i, w in enumerate(workers):
        _check_device(w, f"workers[{i}]", problems)
        if w.device_id in ids:
            problems.append(("workers", "duplicate id"))
        ids.append(w.device_id)
    if not workers:
        problems.append(("workers", "must be non-empty"))

    if not tasks and config.workload is None:
        problems.append(("tasks", "must be non-empty (or give a workload)"))
    for i, t in enumerate(tasks):
        _check_task(t, f"tasks[{i}]", problems)
    if len({t.task_id for t in tasks}) != len(tasks):
        problems.append(("tasks", "duplicate task_id"))
    if config.workload is not None:
        w = config.workload
        if not isinstance(w.n_jobs, int) or w.n_jobs < 1:
            problems.append(("workload.n_jobs", "must be ≥ 1"))
        if not isinstance(w.chunk, int) or w.chunk < 1:
            problems.append(("steal_chunk_size", "must be ≥ 1"))
        lo, hi = w.payload_bytes
        if not (isinstance(lo, int) and isinstance(hi, int) and 0 <= lo <= hi):
            problems.append(("workload.payload_bytes", "need 0 <= lower <= upper"))
        lo, hi = w.compute_cost
        if not (_positive(lo) and _positive(hi) and lo <= hi):
            problems.append(("workload.compute_cost", "need 0 < lower <= upper"))
        if w.complexity is not None and not _positive(w.complexity):
            problems.append(("workload.complexity", "must be > 0"))

    if not isinstance(config.iterations, int) or config.iterations < 1:
        problems.append(("iterations", "must be ≥ 1"))
    if not _positive(config.privacy.epsilon):
        problems.append(("privacy.epsilon", "must be > 0"))
    if not _positive(config.privacy.sensitivity):
        problems.append(("privacy.sensitivity", "must be > 0"))
    pol = config.selection_policy
    if not _positive(pol.eta):
        problems.append(("selection_policy.eta", "must be > 0"))
    if not isinstance(pol.lambda_window, int) or pol.lambda_window < 1:
        problems.append(("selection_policy.lambda_window", "must be ≥ 1"))
    if not isinstance(pol.failure_threshold, int) or pol.failure_threshold < 1:
        problems.append(("selection_policy.failure_threshold", "must be ≥ 1"))
    if not _nonneg(config.ledger_query_overhead_s):
        problems.append(("ledger_query_overhead_s", "must be >= 0"))
    if not _positive(config.slack_factor):
        problems.append(("slack_factor", "must be > 0"))
    if not isinstance(config.rng_seed, int) or not 0 <= config.rng_seed < 2 ** 64:
        problems.append(("rng_seed", "must be a 64-bit unsigned integer"))

    if problems:
        raise Invalid(None, problems=problems)
    return replace(config, workers=workers, tasks=tasks, mode=Mode(config.mode),
                   selection_policy=replace(pol, cold_start=ColdStart(pol.cold_start)))


# -- task generation -------------------------------------------------------


def generate_task(n_jobs: int, payload_bytes: Sequence[int], compute_cost: Sequence[float],
                  chunk: int, complexity: Optional[float] = None, seed: int = 0,
                  result_bytes: int = DEFAULT_RESULT_BYTES, task_id: int = 0) -> TaskSpec:
    """Draw a synthetic task with ``n_jobs`` jobs.

    Payload sizes are uniform integers on the closed ``payload_bytes`` range and
    compute costs uniform reals on ``compute_cost``; both come from a generator
    seeded with ``seed`` alone.
    """
    p_lo, p_hi = (int(v) for v in payload_bytes)
    c_lo, c_hi = (float(v) for v in compute_cost)
    if n_jobs < 1:
        raise InvalidRange("n_jobs must be ≥ 1")
    if chunk < 1:
        raise InvalidRange("chunk must be ≥ 1")
    if not 0 <= p_lo <= p_hi:
        raise InvalidRange(f"payload range [{p_lo}, {p_hi}] is empty or negative")
    if not 0 < c_lo <= c_hi:
        raise InvalidRange(f"compute_cost range [{c_lo}, {c_hi}] is empty or non-positive")
    rng = np.random.default_rng(seed)
    payloads = rng.integers(p_lo, p_hi, size=n_jobs, endpoint=True)
    costs = c_lo + (c_hi - c_lo) * rng.random(n_jobs) if c_hi > c_lo else np.full(n_jobs, c_lo)
    jobs = tuple(JobSpec(i, int(payloads[i]), float(costs[i]), result_bytes) for i in range(n_jobs))
    return TaskSpec(task_id, jobs, chunk, complexity)
