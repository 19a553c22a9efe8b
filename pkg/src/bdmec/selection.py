"""History-based worker selection.

Each worker gets a capacity score (contribution- and complexity-weighted
mean of the speed gains of iterations it took part in) and a behaviour flag
recomputed from its recent audit evidence. Workers scoring above 1 with a
clean flag are selected, best first; if none qualify the delegator runs the
task alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

from .adversary import AuditReport
from .ledger import Channel, LedgerStore, TransactionRecord
from .model import ColdStart, SelectionPolicy


class ZeroTotalJobs(ValueError):
    pass


class LedgerUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkerAssessment:
    worker_id: str
    fractional_speed_gain: float
    lambda_: int
    history_length: int = 0
    contributions: Tuple[Tuple[int, float, float, float], ...] = ()


@dataclass(frozen=True)
class SelectionDecision:
    selected: Tuple[str, ...]
    assessments: Tuple[WorkerAssessment, ...] = field(default=(), compare=False)

    @property
    def local_execution(self):
        return not self.selected


def fractional_contribution(jobs_by_worker: int, total_jobs: int) -> float:
    if total_jobs <= 0:
        raise ZeroTotalJobs("total_jobs must be positive")
    if not 0 <= jobs_by_worker <= total_jobs:
        raise ValueError(f"jobs_by_worker {jobs_by_worker} outside [0, {total_jobs}]")
    return jobs_by_worker / total_jobs


def fractional_speed_gain(contributions: Iterable[Tuple[float, float, float]]) -> float:
    """Weighted mean of speed gains, weight = complexity * contribution.

    ``contributions`` holds ``(wc, complexity, speed_gain)`` triples.
    """
    num = 0.0
    den = 0.0
    for wc, c, s in contributions:
        w = c * wc
        num += w * s
        den += w
    if den == 0:
        return 0.0
    return num / den


def evaluate_lambda(audit_history: Sequence[AuditReport], policy: SelectionPolicy) -> int:
    """-1 if the window shows any lie, late result, or repeated lost chunks."""
    window = list(audit_history)[-policy.lambda_window:]
    if any(r.count_mismatch or r.id_fabrication or r.deadline_violations > 0 for r in window):
        return -1
    if sum(r.incomplete_chunks for r in window) >= policy.failure_threshold:
        return -1
    return 1


def find_max(assessments: Sequence[WorkerAssessment]) -> List[WorkerAssessment]:
    return sorted(assessments, key=lambda a: (-a.fractional_speed_gain, a.worker_id))


def audit_from_record(rec: TransactionRecord) -> AuditReport:
    return AuditReport(rec.worker_id, rec.count_mismatch, rec.id_fabrication,
                       rec.incomplete_chunks, rec.deadline_violations)


def assess_worker(worker_id: str, history: Sequence[TransactionRecord],
                  policy: SelectionPolicy) -> WorkerAssessment:
    if not history:
        if ColdStart(policy.cold_start) is ColdStart.OPTIMISTIC:
            return WorkerAssessment(worker_id, 1.0 + policy.eta, 1, 0)
        # Strict: no evidence, no admission
        return WorkerAssessment(worker_id, 0.0, 1, 0)
    contributions = tuple(
        (r.iteration_id, fractional_contribution(r.jobs_executed, r.total_jobs),
         r.task_complexity, r.speed_gain)
        for r in history)
    s_i = fractional_speed_gain((wc, c, s) for _, wc, c, s in contributions)
    lam = evaluate_lambda([audit_from_record(r) for r in history], policy)
    return WorkerAssessment(worker_id, s_i, lam, len(history), contributions)


def gate(assessments: Sequence[WorkerAssessment]) -> SelectionDecision:
    ranked = find_max(assessments)
    chosen = tuple(a.worker_id for a in ranked if a.fractional_speed_gain > 1 and a.lambda_ > 0)
    return SelectionDecision(chosen, tuple(ranked))


def select_workers(pool: Sequence[str], ledger: LedgerStore,
                   policy: SelectionPolicy) -> SelectionDecision:
    """Assess every pool member from the delegator channel and apply the gate."""
    if not ledger.connected:
        raise LedgerUnavailable("selection needs to read the ledger")
    assessments = [assess_worker(w, ledger.query_worker_history(Channel.DELEGATOR, w), policy)
                   for w in pool]
    return gate(assessments)


def write_assessments_csv(rows, path):
    """``rows`` are ``(seed, WorkerAssessment)`` pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "worker_id", "S_i", "lambda", "history_length"])
        for seed, a in rows:
            w.writerow([seed, a.worker_id, repr(a.fractional_speed_gain), a.lambda_,
                        a.history_length])
