"""Stochastic map oracles and solution-quality merit functions.

A :class:`StochasticMap` bundles a noisy sampler with an optional exact
mean map and the problem constants (strong-monotonicity modulus, Lipschitz
constant, per-block bounds, noise second moment).  The engine consumes
samples directly; the noise term relative to the mean is never formed.

Samplers operate on flat arrays internally (``sample_flat``); the
block-vector API wraps them.  A vectorized ``sample_batch`` drawing one
independent realization per row may be supplied and is exploited by the
Monte-Carlo estimators and the sample-average oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .blocks import BlockVector
from .errors import DimensionMismatchError
from .projections import DykstraConfig, project_cartesian
from .sets import CartesianSet

__all__ = ["MapConstants", "StochasticMap", "sample_map", "natural_residual"]


@dataclass(frozen=True)
class MapConstants:
    """Problem constants attached to a map.

    ``comp_bounds`` are per-block sup bounds on the mean map over the
    relevant (possibly enlarged) set; ``noise_bound`` is an upper bound on
    the conditional second moment of the sampling error norm.
    """

    eta: float | None = None
    lip: float | None = None
    comp_bounds: tuple[float, ...] | None = None
    noise_bound: float | None = None  # nu^2

    @property
    def nu(self) -> float | None:
        return None if self.noise_bound is None else float(np.sqrt(self.noise_bound))


@dataclass
class StochasticMap:
    """Sampler for a map given as a blockwise expectation.

    ``sample_flat(x, rng)`` returns one draw at ``x``; repeated calls with
    the same generator state are bit-reproducible.  ``exact_mean_flat``,
    when present, accepts either a single point ``(n,)`` or a batch
    ``(m, n)`` and evaluates the mean map exactly.
    """

    dims: tuple[int, ...]
    sample_flat: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    exact_mean_flat: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sample_batch: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]] = None
    constants: Optional[MapConstants] = None
    name: str = ""

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    @property
    def has_exact_mean(self) -> bool:
        return self.exact_mean_flat is not None

    def _check(self, x: BlockVector) -> None:
        x.check_conforms(self.dims)

    def sample(self, x: BlockVector, rng: np.random.Generator) -> BlockVector:
        self._check(x)
        out = np.asarray(self.sample_flat(x.data, rng), dtype=np.float64)
        if out.shape != x.data.shape:
            raise DimensionMismatchError(
                f"sampler returned shape {out.shape} for input shape {x.data.shape}")
        return x.with_data(out)

    def exact_mean(self, x: BlockVector) -> BlockVector:
        if self.exact_mean_flat is None:
            raise ValueError("map has no exact mean")
        self._check(x)
        return x.with_data(np.asarray(self.exact_mean_flat(x.data), dtype=np.float64))

    def sample_mean(self, x: np.ndarray, M: int, rng: np.random.Generator) -> np.ndarray:
        """Average of M independent draws at a fixed flat point."""
        if self.sample_batch is not None:
            X = np.broadcast_to(x, (M, x.size))
            return np.asarray(self.sample_batch(X, rng), dtype=np.float64).mean(axis=0)
        acc = np.zeros(x.size)
        for _ in range(M):
            acc += self.sample_flat(x, rng)
        return acc / M


def sample_map(stochastic_map: StochasticMap, x: BlockVector,
               rng: np.random.Generator) -> BlockVector:
    """One unbiased draw of the map at ``x``."""
    return stochastic_map.sample(x, rng)


def natural_residual(x: BlockVector, f_hat: BlockVector, feasible: CartesianSet,
                     gamma: float, cfg: DykstraConfig | None = None) -> float:
    """|| x - Pi_X(x - gamma * f_hat) ||.

    Vanishes exactly when ``x`` is the fixed point of the projected map
    for the supplied map value; used as the merit function throughout.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    feasible.check_conforms(x)
    x.check_conforms(f_hat.dims)
    moved = x.with_data(x.data - gamma * f_hat.data)
    return (x - project_cartesian(feasible, moved, cfg)).norm()
