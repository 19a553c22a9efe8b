"""Dishonest worker behaviours and the claim audit that exposes them."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import AbstractSet, Optional

from .model import CountInflator, DelayInjector, Honest, IdFabricator


@dataclass(frozen=True)
class AuditReport:
    device_id: str
    count_mismatch: bool = False
    id_fabrication: bool = False
    incomplete_chunks: int = 0
    deadline_violations: int = 0

    @property
    def clean(self):
        return not (self.count_mismatch or self.id_fabrication
                    or self.incomplete_chunks or self.deadline_violations)


def apply_behavior(behavior, true_stats, assigned_ids: Optional[AbstractSet[int]] = None):
    """Turn engine-truth stats into what the worker reports.

    Only the claim fields change; ``jobs_verified`` always stays engine-owned.
    Delay injection is temporal and already happened inside the engine.
    """
    if isinstance(behavior, (Honest, DelayInjector)):
        return true_stats
    if isinstance(behavior, CountInflator):
        return replace(true_stats, jobs_claimed=true_stats.jobs_claimed + behavior.extra_jobs)
    if isinstance(behavior, IdFabricator):
        if assigned_ids is None:
            assigned_ids = true_stats.assigned_ids or true_stats.claimed_ids
        top = max(assigned_ids, default=-1)
        fake = range(top + 1, top + 1 + behavior.fabricated_ids)
        return replace(true_stats, claimed_ids=frozenset(true_stats.claimed_ids).union(fake))
    raise TypeError(f"unknown behavior {behavior!r}")


def audit_claims(assigned_ids, stats, device_id: str = "") -> AuditReport:
    return AuditReport(
        device_id=device_id,
        count_mismatch=stats.jobs_claimed != stats.jobs_verified,
        id_fabrication=not set(stats.claimed_ids) <= set(assigned_ids),
        incomplete_chunks=stats.incomplete_chunks,
        deadline_violations=stats.deadline_violations,
    )
