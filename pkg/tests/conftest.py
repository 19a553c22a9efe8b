import pytest

from bdmec.model import DeviceProfile, Honest, JobSpec, TaskSpec

_CRITERIA = []


def make_task(costs, payloads=None, results=None, chunk=1, task_id=0, complexity=None):
    payloads = payloads or [0] * len(costs)
    results = results or [0] * len(costs)
    jobs = [JobSpec(i, p, c, r) for i, (c, p, r) in enumerate(zip(costs, payloads, results))]
    return TaskSpec(task_id, tuple(jobs), chunk, complexity)


def dev(name, rate=1.0, bw=1.0, lat=0.0, behavior=None, location=""):
    return DeviceProfile(name, rate, bw, lat, behavior or Honest(), location)


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""
    def record(number, ok, detail):
        _CRITERIA.append((number, ok, detail))
        assert ok, f"criterion {number} failed: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
