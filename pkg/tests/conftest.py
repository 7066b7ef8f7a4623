import numpy as np
import pytest

from qreuse.dataset import ConceptDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ds_07():
    """D = (0.4, 0.3, 0.2, 0.1) with labels (0, 0, 1, 1): xi0 = 0.7."""
    return ConceptDataset(2, (0, 0, 1, 1), (0.4, 0.3, 0.2, 0.1))


def closed_p(xi0, L):
    """Answer probabilities written out by hand."""
    d = (2 * xi0 - 1) * L
    return (1 + d) / 2, (1 - d) / 2


# acceptance verdicts: filled by tests/test_acceptance.py, printed after the run
VERDICTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
