"""Block-structured vectors for Cartesian problems.

A block vector is a flat float64 array plus a tuple of block sizes.  All
arithmetic is total-dimension O(n); blocks are views into the flat storage.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

__all__ = ["BlockVector", "block_offsets"]


def block_offsets(dims: tuple[int, ...]) -> np.ndarray:
    """Start offsets of each block in the flat layout, plus the total size."""
    return np.concatenate(([0], np.cumsum(dims))).astype(np.int64)


class BlockVector:
    """Immutable flat vector carrying a fixed block partition."""

    __slots__ = ("data", "dims", "_offsets")

    def __init__(self, data: np.ndarray, dims: tuple[int, ...]):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 1:
            raise DimensionMismatchError(f"expected a 1-D array, got shape {data.shape}")
        dims = tuple(int(d) for d in dims)
        if any(d <= 0 for d in dims):
            raise DimensionMismatchError(f"block dimensions must be positive, got {dims}")
        if data.size != sum(dims):
            raise DimensionMismatchError(
                f"flat size {data.size} does not match block dims {dims} (total {sum(dims)})")
        data = data.copy()
        data.flags.writeable = False
        self.data = data
        self.dims = dims
        self._offsets = block_offsets(dims)

    @classmethod
    def from_blocks(cls, blocks) -> "BlockVector":
        blocks = [np.asarray(b, dtype=np.float64).ravel() for b in blocks]
        dims = tuple(b.size for b in blocks)
        return cls(np.concatenate(blocks) if blocks else np.empty(0), dims)

    @classmethod
    def zeros(cls, dims: tuple[int, ...]) -> "BlockVector":
        return cls(np.zeros(sum(dims)), dims)

    @property
    def n(self) -> int:
        return self.data.size

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    def block(self, i: int) -> np.ndarray:
        return self.data[self._offsets[i]:self._offsets[i + 1]]

    def blocks(self):
        return [self.block(i) for i in range(self.n_blocks)]

    def with_data(self, data: np.ndarray) -> "BlockVector":
        """Same block structure, new flat contents."""
        return BlockVector(data, self.dims)

    def check_conforms(self, dims: tuple[int, ...]) -> None:
        if self.dims != tuple(dims):
            for i, (a, b) in enumerate(zip(self.dims, dims)):
                if a != b:
                    raise DimensionMismatchError(
                        f"block {i} has dimension {a}, expected {b}", block=i)
            raise DimensionMismatchError(
                f"block count mismatch: {len(self.dims)} vs {len(dims)}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def dot(self, other: "BlockVector") -> float:
        return float(self.data @ other.data)

    def __add__(self, other: "BlockVector") -> "BlockVector":
        self.check_conforms(other.dims)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "BlockVector") -> "BlockVector":
        self.check_conforms(other.dims)
        return self.with_data(self.data - other.data)

    def __mul__(self, scalar: float) -> "BlockVector":
        return self.with_data(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "BlockVector":
        return self.with_data(-self.data)

    def __eq__(self, other) -> bool:
        return (isinstance(other, BlockVector) and self.dims == other.dims
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.dims, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"BlockVector(dims={self.dims}, data={self.data!r})"
