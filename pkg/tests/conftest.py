import time

import numpy as np
import pytest

from sonoprep import UltrasoundFrame

SESSION_START = time.perf_counter()
SUITE_BUDGET_SECONDS = 300.0


def make_frame(pixels, id="f", sequence_id="s", frame_index=0) -> UltrasoundFrame:
    return UltrasoundFrame(
        id=id,
        sequence_id=sequence_id,
        frame_index=frame_index,
        pixels=np.asarray(pixels, dtype=np.float64),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - SESSION_START
    ok = elapsed < SUITE_BUDGET_SECONDS
    print(
        f"\n[ACCEPTANCE] suite-runtime: {'PASS' if ok else 'FAIL'} "
        f"({elapsed:.1f}s, budget {SUITE_BUDGET_SECONDS:.0f}s)"
    )
    if not ok and exitstatus == 0:
        session.exitstatus = 1
