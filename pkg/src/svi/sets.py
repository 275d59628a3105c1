"""Feasible-set descriptions: per-block convex sets and their Cartesian product.

Five block kinds are supported: boxes, Euclidean balls, halfspaces,
polyhedra {y : A y <= b} (optionally intersected with the nonnegative
orthant), and the whole space.  Construction performs the decidable
checks (bound ordering, shapes); polyhedron nonemptiness is verified by
the projection machinery, see :func:`svi.projections.check_nonempty`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector
from .errors import DimensionMismatchError, ParameterError

__all__ = ["Box", "Ball", "Halfspace", "Polyhedron", "WholeSpace", "CartesianSet"]


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Box:
    """{ y : lower <= y <= upper }, bounds may be +-inf coordinatewise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_float_array(self.lower, "lower"))
        object.__setattr__(self, "upper", _as_float_array(self.upper, "upper"))
        if self.lower.shape != self.upper.shape:
            raise ParameterError("box bounds must have equal shapes")
        if np.any(self.lower > self.upper):
            raise ParameterError("box requires lower <= upper in every coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    def max_violation(self, y: np.ndarray) -> float:
        return float(max(np.max(self.lower - y, initial=0.0),
                         np.max(y - self.upper, initial=0.0)))


@dataclass(frozen=True)
class Ball:
    """{ y : ||y - center|| <= radius }."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_float_array(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ParameterError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.size

    def max_violation(self, y: np.ndarray) -> float:
        return float(max(np.linalg.norm(y - self.center) - self.radius, 0.0))


@dataclass(frozen=True)
class Halfspace:
    """{ y : a @ y <= b }."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_float_array(self.a, "a"))
        object.__setattr__(self, "b", float(self.b))
        if not np.any(self.a != 0):
            raise ParameterError("halfspace normal must be nonzero")

    @property
    def dim(self) -> int:
        return self.a.size

    def max_violation(self, y: np.ndarray) -> float:
        return float(max(self.a @ y - self.b, 0.0))


@dataclass(frozen=True)
class Polyhedron:
    """{ y : A y <= b }, intersected with { y >= 0 } when ``nonneg`` is set."""

    A: np.ndarray
    b: np.ndarray
    nonneg: bool = False

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2:
            raise ParameterError(f"A must be a matrix, got shape {A.shape}")
        b = _as_float_array(self.b, "b")
        if b.size != A.shape[0]:
            raise ParameterError(f"b has {b.size} entries for {A.shape[0]} rows of A")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ParameterError("polyhedron rows must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def max_violation(self, y: np.ndarray) -> float:
        v = float(np.max(self.A @ y - self.b, initial=0.0))
        if self.nonneg:
            v = max(v, float(np.max(-y, initial=0.0)))
        return v


@dataclass(frozen=True)
class WholeSpace:
    """All of R^dim; projection is the identity."""

    dim_: int

    def __post_init__(self):
        if self.dim_ <= 0:
            raise ParameterError("dimension must be positive")

    @property
    def dim(self) -> int:
        return self.dim_

    def max_violation(self, y: np.ndarray) -> float:
        return 0.0


SetBlock = Box | Ball | Halfspace | Polyhedron | WholeSpace


@dataclass(frozen=True)
class CartesianSet:
    """Product of per-block convex sets; the feasible set of the problem."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ParameterError("a Cartesian set needs at least one block")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(blk.dim for blk in self.blocks)

    @property
    def n(self) -> int:
        return sum(self.dims)

    def check_conforms(self, x: BlockVector) -> None:
        x.check_conforms(self.dims)

    def max_violation(self, x: BlockVector) -> float:
        self.check_conforms(x)
        return max(blk.max_violation(xb) for blk, xb in zip(self.blocks, x.blocks()))

    def contains(self, x: BlockVector, tol: float = 1e-9) -> bool:
        return self.max_violation(x) <= tol

    def validate_nonempty(self, cfg=None) -> None:
        """Verify every polyhedron block admits a feasible point.

        Delegates to the projection module (imported lazily to keep this
        module free of the numerical machinery).
        """
        from . import projections

        for i, blk in enumerate(self.blocks):
            if isinstance(blk, Polyhedron):
                try:
                    projections.check_nonempty(blk, cfg)
                except Exception as exc:
                    raise ParameterError(f"block {i} appears to be empty: {exc}") from exc
