"""Vector distance and the distance-computation counter.

All comparisons in the library use squared Euclidean distance: it is
order-equivalent to L2 and the alpha-pruning test is applied in squared form
(alpha^2 * sq(u,v) > sq(p,v)) so no square roots are ever needed.
"""

from __future__ import annotations

import threading
from typing import Optional

import numpy as np

from .errors import DimensionMismatch


class DcCounter:
    """Thread-safe count of vector distance evaluations."""

    __slots__ = ("_count", "_lock")

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    def reset(self) -> None:
        with self._lock:
            self._count = 0


def sq_l2(a: np.ndarray, b: np.ndarray, counter: Optional[DcCounter] = None) -> float:
    """Squared L2 distance with float64 accumulation; counts as one DC."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dimensions differ: {a.shape} vs {b.shape}")
    if counter is not None:
        counter.add(1)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.dot(diff, diff))
