import numpy as np
import pytest

from jointann.attrs import (
    Attribute,
    AttributeSet,
    BoolPredicateFilter,
    EqualityFilter,
    Family,
    RangeFilter,
    SubsetFilter,
)


def random_attribute(rng: np.random.Generator, family: Family) -> Attribute:
    if family == Family.LABEL:
        return Attribute.label(int(rng.integers(0, 12)))
    if family == Family.SCALAR:
        return Attribute.scalar(float(rng.uniform(0, 1e6)))
    if family == Family.BITSET:
        return Attribute.bitset(int(rng.integers(0, 1 << 20)), 20)
    return Attribute.bool_assign(int(rng.integers(0, 1 << 10)), 10)


def random_filter(rng: np.random.Generator, family: Family):
    if family == Family.LABEL:
        return EqualityFilter(int(rng.integers(0, 12)))
    if family == Family.SCALAR:
        lo = float(rng.uniform(0, 1e6))
        return RangeFilter(lo, lo + float(rng.uniform(0, 5e5)))
    if family == Family.BITSET:
        return SubsetFilter(int(rng.integers(0, 1 << 20)), 20)
    while True:
        table = rng.random(1 << 10) < 0.3
        if table.any():
            return BoolPredicateFilter(table, 10)


@pytest.fixture(scope="session")
def small_scalar_dataset():
    rng = np.random.Generator(np.random.PCG64(11))
    vecs = rng.standard_normal((600, 8)).astype(np.float32)
    attrs = AttributeSet.from_scalars(rng.uniform(0, 1e6, 600))
    return vecs, attrs
