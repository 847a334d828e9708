import numpy as np
import pytest

from seepline.data import MonitoringSeries
from seepline.synth import SyntheticSpec, generate


def make_series(columns, start=0, step=7200):
    """MonitoringSeries from a {channel: values} dict; NaN marks missing."""
    names = list(columns)
    vals = np.column_stack([np.asarray(columns[c], dtype=np.float64) for c in names])
    ts = start + step * np.arange(len(vals))
    return MonitoringSeries(ts, names, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    spec = SyntheticSpec(
        n=400,
        stations=("no8", "no13"),
        base_levels=(4.57, 7.73),
        spreads=(0.87, 1.32),
        missing_fraction=0.05,
        seed=5,
    )
    return generate(spec)


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory, small_synth):
    from seepline.synth import write_synthetic

    d = tmp_path_factory.mktemp("synth")
    write_synthetic(small_synth, d)
    return d / "synth.csv"


_CRITERIA = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, ok, detail, seconds, limit)."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, ok, detail, seconds, limit):
        timed = seconds < limit
        status = "PASS" if ok and timed else "FAIL"
        lines[number] = f"criterion {number:>2}: {status}  {detail}  [{seconds:.1f}s / limit {limit:.0f}s]"
        print(lines[number])
        return ok and timed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
