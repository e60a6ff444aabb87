import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from jointann.errors import DimensionMismatch
from jointann.metric import DcCounter, sq_l2


def test_sq_l2_known_value():
    a = np.array([1.0, 2.0, 3.0], dtype=np.float32)
    b = np.array([4.0, 6.0, 3.0], dtype=np.float32)
    assert sq_l2(a, b) == pytest.approx(25.0)


def test_sq_l2_matches_reference_loop():
    rng = np.random.Generator(np.random.PCG64(1))
    a = rng.standard_normal(16).astype(np.float32)
    b = rng.standard_normal(16).astype(np.float32)
    ref = sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
    assert sq_l2(a, b) == pytest.approx(ref, rel=1e-6)


@given(
    hnp.arrays(np.float32, 8, elements=st.floats(-100, 100, width=32)),
    hnp.arrays(np.float32, 8, elements=st.floats(-100, 100, width=32)),
)
def test_sq_l2_nonnegative_symmetric(a, b):
    assert sq_l2(a, b) >= 0.0
    assert sq_l2(a, b) == sq_l2(b, a)
    assert sq_l2(a, a) == 0.0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        sq_l2(np.zeros(3, np.float32), np.zeros(4, np.float32))


def test_counter_counts_each_call():
    c = DcCounter()
    a = np.zeros(4, np.float32)
    for _ in range(5):
        sq_l2(a, a, c)
    assert c.count == 5
    c.reset()
    assert c.count == 0


def test_counter_thread_safe():
    c = DcCounter()

    def bump():
        for _ in range(10_000):
            c.add()

    threads = [threading.Thread(target=bump) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert c.count == 40_000
