import math

import pytest
from hypothesis import given, settings, strategies as st

from bdmec.engine import NonPositiveTime, simulate_local, simulate_shared, speed_gain, write_event_log
from bdmec.model import DelayInjector, generate_task

from conftest import dev, make_task
from oracle import reference_schedule


def test_simulate_local_formula():
    assert simulate_local(make_task([1.0] * 1000), dev("d", 2.0)) == 500.0
    assert simulate_local(make_task([5.0]), dev("d", 5.0)) == 1.0


@pytest.mark.parametrize("t1, t2, s", [(100, 50, 2.0), (100, 100, 1.0), (100, 200, 0.5)])
def test_speed_gain(t1, t2, s):
    assert speed_gain(t1, t2) == s


@pytest.mark.parametrize("t1, t2", [(0, 1), (1, 0), (-1, 1)])
def test_speed_gain_rejects_non_positive(t1, t2):
    with pytest.raises(NonPositiveTime):
        speed_gain(t1, t2)


def test_no_workers_is_local_execution():
    task = generate_task(30, (0, 100), (0.1, 0.9), 4, seed=2)
    d = dev("d", 3.0)
    out = simulate_shared(task, d, [], 0.0)
    assert out.time_2_s == out.time_1_s == simulate_local(task, d)
    assert out.speed_gain == 1.0


def test_two_equal_consumers_halve_the_time():
    # one worker identical to the delegator, free transfers, 100 unit jobs
    task = make_task([1.0] * 100, chunk=1)
    out = simulate_shared(task, dev("d", 1.0), [dev("w", 1.0)], 0.0)
    assert out.time_2_s == 50.0
    assert out.speed_gain == 2.0
    assert out.worker_stats["w"].jobs_verified == 50
    assert out.delegator_jobs == 50


def test_delay_injector_two_chunks():
    task = make_task([1.0] * 100, chunk=10)
    d = dev("d", 1.0)
    delayed = simulate_shared(task, d, [dev("w", 1.0, behavior=DelayInjector(50.0))], 0.0)
    honest = simulate_shared(task, d, [dev("w", 1.0)], 0.0)
    st_ = delayed.worker_stats["w"]
    assert st_.chunks_stolen == 2
    assert st_.total_response_delay_s >= 2 * 50.0
    assert delayed.time_2_s > honest.time_2_s
    # claims stay truthful; lateness is what gives it away
    assert st_.jobs_claimed == st_.jobs_verified == 20
    assert st_.deadline_violations == 2
    assert honest.worker_stats["w"].deadline_violations == 0


def test_overhead_charged_per_selected_worker():
    task = make_task([1.0] * 20, chunk=2)
    d = dev("d", 1.0)
    ws = [dev("a"), dev("b")]
    plain = simulate_shared(task, d, ws, 0.0)
    charged = simulate_shared(task, d, ws, 0.25)
    assert charged.time_2_s == pytest.approx(plain.time_2_s + 0.5)
    explicit = simulate_shared(task, d, ws, [0.1, 0.4])
    assert explicit.time_2_s == pytest.approx(plain.time_2_s + 0.5)
    assert [e.kind for e in charged.event_log[:2]] == ["ledger-query", "ledger-query"]


def test_transfer_and_compute_timeline():
    # payload 4 bytes at 2 B/s, latency 0.5 each way, result 2 bytes
    task = make_task([3.0], payloads=[4], results=[2], chunk=1)
    d = dev("d", 0.001)
    out = simulate_shared(task, d, [dev("w", 1.5, bw=2.0, lat=0.5)], 0.0)
    kinds = [(e.kind, e.time_s) for e in out.event_log if e.device_id == "w"]
    # delegator wins the tie for the only job, worker never steals
    assert kinds == []
    out = simulate_shared(make_task([1.0, 3.0], payloads=[0, 4], results=[0, 2]), d,
                          [dev("w", 1.5, bw=2.0, lat=0.5)], 0.0)
    w_events = [(e.kind, e.time_s) for e in out.event_log if e.device_id == "w"]
    assert w_events == [("steal", 0.0), ("transfer-start", 0.0), ("transfer-end", 2.5),
                        ("compute-end", 4.5), ("result-received", 6.0)]


def test_horizon_loses_chunk_and_delegator_recovers():
    task = make_task([1.0] * 10, chunk=5)
    d = dev("d", 1.0)
    out = simulate_shared(task, d, [dev("w", 1.0, behavior=DelayInjector(1000.0))], 0.0,
                          horizon_s=20.0)
    st_ = out.worker_stats["w"]
    assert st_.incomplete_chunks == 1
    assert st_.jobs_verified == 0
    assert out.delegator_jobs == 10
    # queue drained at t=5, lost chunk re-run from the horizon
    assert out.time_2_s == 25.0
    assert any(e.kind == "recover" for e in out.event_log)


def _conserved(task, out):
    done = [j for e in out.event_log if e.kind == "compute-end" and e.device_id == "d"
            for j in e.job_ids]
    done += [j for s in out.worker_stats.values() for j in s.verified_ids]
    return sorted(done) == sorted(j.job_id for j in task.jobs)


jobs_st = st.lists(st.sampled_from([0.25, 0.5, 1.0, 1.5, 2.0]), min_size=1, max_size=40)
worker_st = st.tuples(st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.sampled_from([1.0, 8.0, 64.0]),
                      st.sampled_from([0.0, 0.25, 1.0]))


@settings(max_examples=200, deadline=None)
@given(jobs_st, st.lists(worker_st, max_size=3), st.integers(1, 5), st.sampled_from([0.5, 1.0, 3.0]))
def test_properties(costs, workers, chunk, drate):
    task = make_task(costs, payloads=[8] * len(costs), results=[1] * len(costs), chunk=chunk)
    ws = [dev(f"w{i}", r, b, l) for i, (r, b, l) in enumerate(workers)]
    out = simulate_shared(task, dev("d", drate), ws, 0.0)
    assert out.speed_gain == out.time_1_s / out.time_2_s
    assert _conserved(task, out)
    times = [e.time_s for e in out.event_log]
    assert times == sorted(times)
    for w in ws:
        s = out.worker_stats[w.device_id]
        assert s.jobs_verified <= len(s.assigned_ids)
        assert s.jobs_claimed == s.jobs_verified and s.claimed_ids == s.verified_ids
    again = simulate_shared(task, dev("d", drate), ws, 0.0)
    assert again == out and again.event_log == out.event_log


def _owners(out):
    return [(e.device_id, e.job_ids) for e in out.event_log if e.kind == "steal"]


@settings(max_examples=150, deadline=None)
@given(jobs_st, st.integers(1, 5), st.sampled_from([0.5, 5.0, 50.0]), st.integers(0, 2))
def test_delay_never_speeds_up_a_fixed_assignment(costs, chunk, delay, who):
    task = make_task(costs, chunk=chunk)
    base = [dev("a", 1.0), dev("b", 2.0), dev("c", 0.5)]
    out0 = simulate_shared(task, dev("d", 1.0), base, 0.0)
    if out0.worker_stats[base[who].device_id].chunks_stolen == 0:
        return
    slowed = list(base)
    slowed[who] = dev(base[who].device_id, base[who].processing_rate,
                      behavior=DelayInjector(delay))
    out1 = simulate_shared(task, dev("d", 1.0), slowed, 0.0)
    assert out1.worker_stats[base[who].device_id].total_response_delay_s >= delay
    if [o for o, _ in _owners(out1)] == [o for o, _ in _owners(out0)]:
        assert out1.time_2_s >= out0.time_2_s


def test_delay_can_reshuffle_greedy_schedule():
    # list-scheduling anomaly: slowing "a" hands the long last job to the
    # fast worker instead of the delegator, so the whole task ends earlier
    task = make_task([0.25] * 9 + [0.5], chunk=1)
    base = [dev("a", 1.0), dev("b", 2.0), dev("c", 0.5)]
    slowed = [dev("a", 1.0, behavior=DelayInjector(0.5))] + base[1:]
    t0 = simulate_shared(task, dev("d", 1.0), base, 0.0).time_2_s
    t1 = simulate_shared(task, dev("d", 1.0), slowed, 0.0).time_2_s
    assert (t0, t1) == (1.0, 0.75)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from([0.5, 1.0, 2.0]), min_size=1, max_size=10),
       st.lists(worker_st, max_size=2), st.sampled_from([1, 2]))
def test_matches_exact_reference(costs, workers, chunk):
    task = make_task(costs, payloads=[16] * len(costs), results=[2] * len(costs), chunk=chunk)
    ws = [dev(f"w{i}", r, b, l) for i, (r, b, l) in enumerate(workers)]
    out = simulate_shared(task, dev("d", 1.0), ws, 0.0)
    finish, _ = reference_schedule(task, dev("d", 1.0), ws)
    assert abs(out.time_2_s - float(finish)) <= 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_speed_gain_approaches_device_count(n):
    task = make_task([1.0] * 3000, chunk=1)
    out = simulate_shared(task, dev("d", 1.0), [dev(f"w{i}") for i in range(n)], 0.0)
    assert out.speed_gain == pytest.approx(n + 1, abs=(n + 1) ** 2 / 3000)


def test_event_log_csv(tmp_path):
    task = make_task([1.0] * 6, chunk=2)
    out = simulate_shared(task, dev("d"), [dev("w")], 0.0)
    p = tmp_path / "events.csv"
    write_event_log(out.event_log, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "timestamp_s,event_kind,device_id,job_ids"
    assert len(lines) == len(out.event_log) + 1
    assert lines[1].startswith("0.0,steal,d,0")
