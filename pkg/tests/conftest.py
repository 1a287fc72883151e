from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from mnldesign.mnl import Instance
from mnldesign.rng import CounterRNG

settings.register_profile("repo", max_examples=40, deadline=None)
settings.load_profile("repo")

GOLDEN = Path(__file__).parent / "golden"


def random_instance(seed, N=8, K=3, d=3, B=1.0, outside=True):
    rng = CounterRNG(seed, 99)
    feats = np.array([rng.ball(d, 1.0) for _ in range(N)])
    feats /= np.maximum(1.0, np.linalg.norm(feats, axis=1, keepdims=True))
    theta = rng.ball(d, B)
    if np.linalg.norm(theta) > B:
        theta *= B / np.linalg.norm(theta)
    return Instance(feats, rng.uniform(N), K, B, theta, outside_option=outside)


@pytest.fixture
def small_instance():
    return random_instance(0)


@pytest.fixture
def golden_dir():
    return GOLDEN


# acceptance criteria append (number, passed, detail) here; printed at the end of the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
