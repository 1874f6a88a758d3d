import pytest

from twrn.fading import FadingSpec, sample_channels

_ACCEPTANCE = []


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""
    def record(criterion, ok, detail):
        line = f"criterion {criterion:<3} {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fading_small():
    return sample_channels(FadingSpec(1.0, 1.0, 1.0, 2.0, n_samples=4000, seed=11))


@pytest.fixture(scope="session")
def unit_small():
    return sample_channels(FadingSpec(n_samples=4000, seed=3))
