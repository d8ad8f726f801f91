from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage


def square_map() -> np.ndarray:
    m = np.zeros((8, 8), dtype=np.uint16)
    m[2:6, 2:6] = 7
    return m


def blob_map(rng: np.random.Generator, h: int, w: int, n_labels: int = 4) -> np.ndarray:
    """Random label map built from upsampled noise, so regions are blobby."""
    ch, cw = max(1, h // 3), max(1, w // 3)
    coarse = rng.integers(0, n_labels, (ch, cw))
    m = ndimage.zoom(coarse, (h / ch, w / cw), order=0)[:h, :w]
    fine = rng.random((h, w)) < 0.05
    m[fine] = rng.integers(0, n_labels, int(fine.sum()))
    return m.astype(np.uint16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square():
    return square_map()


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        results[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
