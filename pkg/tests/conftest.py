import json
import os
from pathlib import Path

# acceptance timings are stated for one CPU core
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def mini_corpus_path():
    return FIXTURES / "mini_corpus.jsonl"


@pytest.fixture
def mini_kb_path():
    return FIXTURES / "mini_kb.tsv"


@pytest.fixture
def mini_manifest():
    return json.loads((FIXTURES / "mini_manifest.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria: one pass/fail line each at the end of the run

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.skipped:
        status = "SKIP"
    elif report.failed:
        status = "FAIL"
    elif report.when == "call":
        status = "PASS"
    else:
        return
    previous = _CRITERIA.get(number, (title, "PASS", ""))[1]
    # a criterion fails if any of its tests fails; otherwise a skip shows
    if previous == "FAIL" or (previous == "SKIP" and status == "PASS"):
        status = previous
    details = [_CRITERIA[number][2]] if number in _CRITERIA else []
    details += [value for name, value in report.user_properties if name == "detail" and report.when == "call"]
    _CRITERIA[number] = (title, status, "; ".join(d for d in details if d))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        line = f"criterion {number} {title}: {status}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
