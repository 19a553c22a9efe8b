"""Work-stealing task offloading with ledger-backed worker selection."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ColdStart, CountInflator, DelayInjector, DeviceProfile, Honest, IdFabricator, Invalid,
    InvalidRange, JobSpec, Mode, PrivacyParams, ScenarioConfig, SelectionPolicy, TaskSpec,
    WorkloadSpec, generate_task, validate_scenario,
)
from .engine import IterationOutcome, WorkerIterationStats, simulate_local, simulate_shared, speed_gain  # noqa: E402
from .adversary import AuditReport, apply_behavior, audit_claims  # noqa: E402
from .ledger import Block, Channel, LedgerStore, TransactionRecord  # noqa: E402
from .privacy import laplace_sample, perturb_count, precision_experiment, relative_error  # noqa: E402
from .selection import (  # noqa: E402
    WorkerAssessment, evaluate_lambda, find_max, fractional_contribution, fractional_speed_gain,
    select_workers,
)
from .harness import run_preset, run_scenario, summarize  # noqa: E402
