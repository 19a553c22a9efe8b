from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from bdmec.model import (DelayInjector, Invalid, InvalidRange, ScenarioConfig, generate_task,
                         validate_scenario, WorkloadSpec, CountInflator)

from conftest import dev, make_task


@pytest.fixture
def config():
    return ScenarioConfig(
        delegator=dev("d", 2.0),
        workers=tuple(dev(f"w{i}", 1.0 + i) for i in range(4)),
        tasks=(make_task([1.0] * 10, chunk=2),),
        iterations=3,
    )


def test_valid_config_is_returned_unchanged(config):
    assert validate_scenario(config) == config


def test_validate_is_idempotent(config):
    once = validate_scenario(config)
    assert validate_scenario(once) == once


def test_zero_chunk_rejected(config):
    bad = replace(config, tasks=(make_task([1.0], chunk=0),))
    with pytest.raises(Invalid) as exc:
        validate_scenario(bad)
    assert (exc.value.field, exc.value.reason) == ("steal_chunk_size", "must be ≥ 1")


def test_duplicate_worker_id_rejected(config):
    bad = replace(config, workers=(dev("w1"), dev("w1")))
    with pytest.raises(Invalid) as exc:
        validate_scenario(bad)
    assert (exc.value.field, exc.value.reason) == ("workers", "duplicate id")


@pytest.mark.parametrize("change, field", [
    (dict(iterations=0), "iterations"),
    (dict(workers=()), "workers"),
    (dict(tasks=()), "tasks"),
    (dict(ledger_query_overhead_s=-1.0), "ledger_query_overhead_s"),
    (dict(rng_seed=-1), "rng_seed"),
    (dict(rng_seed=2 ** 64), "rng_seed"),
])
def test_invariant_violations(config, change, field):
    with pytest.raises(Invalid) as exc:
        validate_scenario(replace(config, **change))
    assert field in [f for f, _ in exc.value.problems]


def test_all_problems_reported(config):
    bad = replace(config, delegator=dev("d", rate=0.0), iterations=0)
    with pytest.raises(Invalid) as exc:
        validate_scenario(bad)
    fields = [f for f, _ in exc.value.problems]
    assert "delegator.processing_rate" in fields and "iterations" in fields


def test_bad_behavior_parameters(config):
    bad = replace(config, workers=(dev("w", behavior=DelayInjector(0.0)),
                                   dev("v", behavior=CountInflator(0))))
    with pytest.raises(Invalid) as exc:
        validate_scenario(bad)
    fields = [f for f, _ in exc.value.problems]
    assert "workers[0].behavior.delay_s" in fields
    assert "workers[1].behavior.extra_jobs" in fields


def test_workload_replaces_tasks(config):
    cfg = replace(config, tasks=(), workload=WorkloadSpec(20, (1, 5), (0.5, 1.0), 4))
    cfg = validate_scenario(cfg)
    t0 = cfg.task_for(0, seed=3)
    assert t0.n_jobs == 20 and t0.steal_chunk_size == 4
    assert cfg.task_for(0, seed=3) == t0
    assert cfg.task_for(1, seed=3) != t0


def test_complexity_defaults_to_mean_cost():
    t = make_task([1.0, 2.0, 3.0])
    assert t.complexity == pytest.approx(2.0)


def test_generate_task_large_scale():
    t = generate_task(1000, (1_000_000, 2_000_000), (0.5, 1.5), 40, seed=7)
    assert t.n_jobs == 1000 and t.steal_chunk_size == 40
    assert [j.job_id for j in t.jobs] == list(range(1000))
    assert all(1_000_000 <= j.payload_bytes <= 2_000_000 for j in t.jobs)
    assert all(0.5 <= j.compute_cost <= 1.5 for j in t.jobs)


def test_generate_task_degenerate_range():
    t = generate_task(1, (1234, 1234), (2.0, 2.0), 1, seed=0)
    assert t.jobs[0].payload_bytes == 1234
    assert t.jobs[0].compute_cost == 2.0


def test_generate_task_deterministic():
    a = generate_task(50, (0, 100), (0.1, 1.0), 5, seed=99)
    b = generate_task(50, (0, 100), (0.1, 1.0), 5, seed=99)
    assert a == b
    assert a != generate_task(50, (0, 100), (0.1, 1.0), 5, seed=100)


@pytest.mark.parametrize("args", [
    dict(payload_bytes=(10, 5), compute_cost=(1.0, 2.0)),
    dict(payload_bytes=(0, 5), compute_cost=(2.0, 1.0)),
    dict(payload_bytes=(0, 5), compute_cost=(0.0, 1.0)),
    dict(payload_bytes=(-1, 5), compute_cost=(1.0, 2.0)),
])
def test_generate_task_invalid_range(args):
    with pytest.raises(InvalidRange):
        generate_task(10, chunk=1, seed=0, **args)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1), st.integers(1, 50))
def test_generate_task_pure_function_of_seed(n, seed, chunk):
    a = generate_task(n, (0, 1000), (0.1, 2.0), chunk, seed=seed)
    b = generate_task(n, (0, 1000), (0.1, 2.0), chunk, seed=seed)
    assert a == b
    assert a.n_jobs == n
