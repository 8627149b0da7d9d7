import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("dcgd", max_examples=200, deadline=None)
settings.load_profile("dcgd")


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    # reference tables go to a throwaway directory, never the user cache
    old = os.environ.get("DCGD_CACHE_DIR")
    os.environ["DCGD_CACHE_DIR"] = str(tmp_path_factory.mktemp("dcgd-cache"))
    yield
    if old is None:
        os.environ.pop("DCGD_CACHE_DIR", None)
    else:
        os.environ["DCGD_CACHE_DIR"] = old


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line for a criterion; shown in the terminal summary."""
    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {name}: {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
