from __future__ import annotations

import numpy as np
import pytest

from binspatial.signal import BinauralSignal

SR = 44100


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def noise_pair(rng, n=4096, sr=SR) -> BinauralSignal:
    left, right = rng.standard_normal((2, n))
    return BinauralSignal(left, right, sr)


@pytest.fixture
def stereo(rng):
    return noise_pair(rng)


# Acceptance criteria register their verdicts here; the summary prints one line each.
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
