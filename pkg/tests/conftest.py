import numpy as np
import pytest
from hypothesis import settings

from penclogit.data import Dataset, Stratum

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one acceptance outcome: ``report(number, passed, detail)``."""

    def _record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def random_dataset(rng, K, n, m, p, scale=1.0):
    strata = tuple(Stratum(str(k), m, scale * rng.standard_normal((n, p))) for k in range(K))
    return Dataset(strata)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
