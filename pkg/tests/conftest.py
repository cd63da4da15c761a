import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from softseg.volcore import Volume3D  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mask_from_list(values, dims):
    return Volume3D.mask(np.asarray(values), dims)


def real_from_list(values, dims):
    return Volume3D.real(np.asarray(values, dtype=float), dims)
