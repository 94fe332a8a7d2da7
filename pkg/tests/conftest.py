import os
from pathlib import Path

import numpy as np
import pytest

from ecg_gaf.signal_io import SEGMENT_LENGTH, synthetic_heartbeats

DATA_DIR = os.environ.get("ECG_GAF_DATA")


def data_file(name: str) -> Path | None:
    """Path to a public heartbeat CSV under $ECG_GAF_DATA, if present."""
    if not DATA_DIR:
        return None
    path = Path(DATA_DIR) / name
    return path if path.exists() else None


def write_rows(path: Path, rows, labels, label_fmt="{:.1f}") -> Path:
    with open(path, "w") as f:
        for row, label in zip(rows, labels):
            f.write(",".join(repr(float(v)) for v in row) + "," + label_fmt.format(label) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic5():
    return synthetic_heartbeats([40, 30, 30, 20, 20], seed=11)


@pytest.fixture
def csv_factory(tmp_path):
    def make(rows, labels, name="data.csv", **kw):
        return write_rows(tmp_path / name, rows, labels, **kw)

    return make


@pytest.fixture
def zero_rows():
    return np.zeros((2, SEGMENT_LENGTH))


# -- acceptance verdicts ---------------------------------------------------

_VERDICTS: dict[str, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.skipped or rep.failed):
        return
    number, title = str(mark.args[0]), mark.args[1]
    if rep.skipped:
        detail = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        verdict = ("SKIP", detail.removeprefix("Skipped: "))
    elif rep.failed:
        verdict = ("FAIL", str(getattr(call.excinfo, "value", "")).splitlines()[0] if call.excinfo else "")
    else:
        verdict = ("PASS", getattr(item, "acceptance_detail", ""))
    # A parametrized criterion keeps its worst verdict.
    rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
    prev = _VERDICTS.get(number)
    if prev is None or rank[verdict[0]] > rank[prev[0]]:
        _VERDICTS[number] = (verdict[0], title, verdict[1])


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        status, title, detail = _VERDICTS[number]
        line = f"criterion {number}: {status:4} {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
