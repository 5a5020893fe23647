import os
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}

DATA_ENV = "NYSTROM_MP_DATA"
DEFAULT_DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "suitesparse"


def data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV, DEFAULT_DATA_DIR))


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    detail = ""
    if call.excinfo is not None:
        detail = str(call.excinfo.value).splitlines()[0] if str(call.excinfo.value) else call.excinfo.typename
    ACCEPTANCE_RESULTS[number] = (f"{outcome}  criterion {number:>2}: {title}", detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        line, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
