"""Discrete-event model of shared-queue work stealing.

The delegator pulls single jobs off a FIFO queue; each worker steals
``steal_chunk_size`` jobs at a time, pays an inbound transfer, computes, and
pays an outbound transfer (plus any injected delay) before stealing again.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _accel
from .adversary import apply_behavior
from .model import DelayInjector, DeviceProfile, TaskSpec


class NonPositiveTime(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    time_s: float
    kind: str
    device_id: str
    job_ids: Tuple[int, ...] = ()


@dataclass(frozen=True)
class WorkerIterationStats:
    jobs_verified: int = 0
    jobs_claimed: int = 0
    claimed_ids: FrozenSet[int] = frozenset()
    chunks_stolen: int = 0
    deadline_violations: int = 0
    total_response_delay_s: float = 0.0
    assigned_ids: FrozenSet[int] = frozenset()
    verified_ids: FrozenSet[int] = frozenset()
    incomplete_chunks: int = 0


@dataclass(frozen=True)
class IterationOutcome:
    iteration_id: int
    time_1_s: float
    time_2_s: float
    speed_gain: float
    worker_stats: Dict[str, WorkerIterationStats]
    event_log: Tuple[Event, ...] = field(repr=False)
    delegator_jobs: int = 0

    def export_events_csv(self, path):
        write_event_log(self.event_log, path)


def speed_gain(time_1_s: float, time_2_s: float) -> float:
    if not (time_1_s > 0 and time_2_s > 0):
        raise NonPositiveTime(f"times must be positive, got {time_1_s!r}, {time_2_s!r}")
    return time_1_s / time_2_s


def simulate_local(task: TaskSpec, delegator: DeviceProfile) -> float:
    total = 0.0
    for job in task.jobs:  # sequential sum, same order as the shared schedule
        total += job.compute_cost
    return total / delegator.processing_rate


def simulate_shared(task: TaskSpec, delegator: DeviceProfile,
                    selected_workers: Sequence[DeviceProfile],
                    overheads: Union[float, Sequence[float]] = 0.0,
                    *, iteration_id: int = 0, slack_factor: float = 3.0,
                    reference_rate: Optional[float] = None,
                    horizon_s: float = math.inf,
                    time_1_s: Optional[float] = None) -> IterationOutcome:
    """Run one shared iteration.

    ``overheads`` is the per-selected-worker ledger query cost (a scalar is
    applied to every worker); the sum is paid before any processing starts.
    Response deadlines are ``slack_factor`` times the chunk's expected
    turnaround at ``reference_rate`` (the delegator's own rate by default).
    Worker results that arrive after ``horizon_s`` are dropped and their jobs
    re-run by the delegator.
    """
    workers = list(selected_workers)
    if isinstance(overheads, (int, float)):
        overhead = float(overheads) * len(workers)
    else:
        overheads = list(overheads)
        if len(overheads) != len(workers):
            raise ValueError("one overhead per selected worker")
        overhead = math.fsum(overheads)
    if time_1_s is None:
        time_1_s = simulate_local(task, delegator)
    ref_rate = delegator.processing_rate if reference_rate is None else reference_rate

    cost, payload, result = task.arrays()
    devices = [delegator] + workers
    rate = np.array([d.processing_rate for d in devices], dtype=np.float64)
    bw = np.array([d.bandwidth_bps for d in devices], dtype=np.float64)
    lat = np.array([d.link_latency_s for d in devices], dtype=np.float64)
    delay = np.array([d.behavior.delay_s if isinstance(d.behavior, DelayInjector) else 0.0
                      for d in devices], dtype=np.float64)

    sched = _accel.steal_schedule(cost, payload, result, rate, bw, lat, delay,
                                  task.steal_chunk_size, overhead, float(horizon_s))
    # plain python scalars from here on; per-element numpy indexing is slow
    (owner, lo, hi, steal_t, in_end, comp_end, result_t,
     lost, recovery) = (np.asarray(a).tolist() for a in sched)

    job_ids = [j.job_id for j in task.jobs]
    events = []
    seq = 0

    def emit(t, kind, dev, ids=()):
        nonlocal seq
        events.append((t, seq, Event(t, kind, dev, ids)))
        seq += 1

    if overhead > 0:
        for w in workers:
            emit(0.0, "ledger-query", w.device_id)

    acc = {w.device_id: dict(assigned=[], verified=[], chunks=0, late=0, resp=0.0, lost=0)
           for w in workers}
    time_2 = overhead
    delegator_jobs = 0
    for c in range(len(owner)):
        o = owner[c]
        ids = tuple(job_ids[lo[c]:hi[c]])
        dev = devices[o]
        if o == 0:
            emit(steal_t[c], "recover" if recovery[c] else "steal", dev.device_id, ids)
            emit(result_t[c], "compute-end", dev.device_id, ids)
            delegator_jobs += len(ids)
            if result_t[c] > time_2:
                time_2 = result_t[c]
            continue
        a = acc[dev.device_id]
        a["chunks"] += 1
        a["assigned"].extend(ids)
        t0 = steal_t[c]
        emit(t0, "steal", dev.device_id, ids)
        emit(t0, "transfer-start", dev.device_id, ids)
        emit(in_end[c], "transfer-end", dev.device_id, ids)
        emit(comp_end[c], "compute-end", dev.device_id, ids)
        if lost[c]:
            a["lost"] += 1
            continue
        r = result_t[c]
        emit(r, "result-received", dev.device_id, ids)
        a["verified"].extend(ids)
        a["resp"] += r - t0
        time_2 = max(time_2, r)
        sl = slice(lo[c], hi[c])
        expected = (float(np.sum(payload[sl])) / dev.bandwidth_bps + dev.link_latency_s
                    + float(np.sum(cost[sl])) / ref_rate
                    + float(np.sum(result[sl])) / dev.bandwidth_bps + dev.link_latency_s)
        if r - t0 > slack_factor * expected:
            a["late"] += 1

    events.sort()  # (time, seq) is unique, Event is never compared
    stats = {}
    for w in workers:
        a = acc[w.device_id]
        verified = frozenset(a["verified"])
        truth = WorkerIterationStats(
            jobs_verified=len(verified), jobs_claimed=len(verified), claimed_ids=verified,
            chunks_stolen=a["chunks"], deadline_violations=a["late"],
            total_response_delay_s=a["resp"], assigned_ids=frozenset(a["assigned"]),
            verified_ids=verified, incomplete_chunks=a["lost"])
        stats[w.device_id] = apply_behavior(w.behavior, truth)

    return IterationOutcome(iteration_id=iteration_id, time_1_s=time_1_s, time_2_s=time_2,
                            speed_gain=speed_gain(time_1_s, time_2), worker_stats=stats,
                            event_log=tuple(e[2] for e in events), delegator_jobs=delegator_jobs)


def write_event_log(events: Sequence[Event], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_s", "event_kind", "device_id", "job_ids"])
        for e in events:
            w.writerow([repr(e.time_s), e.kind, e.device_id, " ".join(map(str, e.job_ids))])
