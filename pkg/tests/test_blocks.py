import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svi.blocks import BlockVector
from svi.errors import DimensionMismatchError


def test_from_blocks_roundtrip():
    v = BlockVector.from_blocks([[1.0, 2.0], [3.0], [4.0, 5.0, 6.0]])
    assert v.dims == (2, 1, 3)
    assert np.array_equal(v.data, [1, 2, 3, 4, 5, 6])
    assert np.array_equal(v.block(1), [3.0])
    rebuilt = BlockVector.from_blocks(v.blocks())
    assert rebuilt == v


@given(st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=5),
       st.integers(0, 2 ** 31 - 1))
@settings(max_examples=50, deadline=None)
def test_flatten_unflatten_roundtrip(dims, seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(sum(dims))
    v = BlockVector(data, tuple(dims))
    assert np.array_equal(np.concatenate(v.blocks()), data)
    assert BlockVector.from_blocks(v.blocks()) == v


def test_arithmetic_preserves_structure():
    a = BlockVector(np.array([1.0, 2.0, 3.0]), (2, 1))
    b = BlockVector(np.array([0.5, 0.5, 0.5]), (2, 1))
    assert (a + b).dims == (2, 1)
    assert np.array_equal((a - b).data, [0.5, 1.5, 2.5])
    assert np.array_equal((2.0 * a).data, [2, 4, 6])
    assert (-a).norm() == a.norm()
    assert a.dot(b) == pytest.approx(3.0)


def test_dimension_mismatch_names_block():
    a = BlockVector(np.zeros(3), (2, 1))
    b = BlockVector(np.zeros(3), (1, 2))
    with pytest.raises(DimensionMismatchError) as exc:
        a + b
    assert exc.value.block == 0


def test_construction_validation():
    with pytest.raises(DimensionMismatchError):
        BlockVector(np.zeros(3), (2, 2))
    with pytest.raises(DimensionMismatchError):
        BlockVector(np.zeros((2, 2)), (4,))
    with pytest.raises(DimensionMismatchError):
        BlockVector(np.zeros(2), (2, 0))


def test_data_is_immutable():
    v = BlockVector(np.arange(3.0), (3,))
    with pytest.raises(ValueError):
        v.data[0] = 9.0
