"""Locally randomized smoothing of non-Lipschitzian maps.

Two perturbation schemes are provided: per-block uniform draws on a ball
(MSR) or on a cube (MCR) of fixed size.  Averaging the map over such a
perturbation yields a Lipschitz map whose constant is computable from
per-block bounds; both certified constants are implemented here together
with the Monte-Carlo estimator of the smoothed map and the density-overlap
utilities used by the audits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector, block_offsets
from .errors import ParameterError
from .maps import StochasticMap

__all__ = [
    "SmoothingScheme",
    "SmoothedLipschitz",
    "double_factorial",
    "ball_volume_coeff",
    "sample_perturbation",
    "sample_perturbation_flat",
    "make_drawer",
    "smoothed_map_mc",
    "msr_lipschitz",
    "mcr_lipschitz",
    "cube_density_l1",
    "product_sum_bound_check",
]

MSR = "msr"
MCR = "mcr"
NONE = "none"


@dataclass(frozen=True)
class SmoothingScheme:
    """Perturbation kind plus per-block radii (MSR) or half-edges (MCR)."""

    kind: str
    eps: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (NONE, MSR, MCR):
            raise ParameterError(f"unknown smoothing kind {self.kind!r}")
        eps = tuple(float(e) for e in self.eps)
        if self.kind != NONE:
            if not eps:
                raise ParameterError("smoothing requires per-block eps")
            if any(e <= 0 for e in eps):
                raise ParameterError("smoothing eps must be strictly positive")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def none(cls) -> "SmoothingScheme":
        return cls(NONE)

    @classmethod
    def ball(cls, eps) -> "SmoothingScheme":
        return cls(MSR, tuple(np.atleast_1d(np.asarray(eps, dtype=float))))

    @classmethod
    def cube(cls, eps) -> "SmoothingScheme":
        return cls(MCR, tuple(np.atleast_1d(np.asarray(eps, dtype=float))))

    @property
    def active(self) -> bool:
        return self.kind != NONE

    def check_blocks(self, dims: tuple[int, ...]) -> None:
        if self.active and len(self.eps) != len(dims):
            raise ParameterError(
                f"scheme has {len(self.eps)} eps for {len(dims)} blocks")


@dataclass(frozen=True)
class SmoothedLipschitz:
    """Certified Lipschitz constant of a smoothed map plus its inputs."""

    value: float
    kind: str
    comp_bounds: tuple[float, ...]
    dims: tuple[int, ...]
    eps: tuple[float, ...]

    def recompute(self) -> float:
        if self.kind == MSR:
            return msr_lipschitz(self.comp_bounds, self.dims, self.eps).value
        return mcr_lipschitz(self.comp_bounds, sum(self.dims), self.eps).value


def double_factorial(n: int) -> int:
    """n!! with 0!! = (-1)!! = 1; n is capped so the result fits 64 bits."""
    if n < -1:
        raise ParameterError("double factorial needs n >= -1")
    if n > 30:
        raise ParameterError("double factorial overflows 64 bits for n > 30")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def ball_volume_coeff(n: int) -> float:
    """Volume of the n-dimensional unit ball, pi^(n/2) / Gamma(n/2 + 1).

    The gamma factor is evaluated through its integer/half-integer cases:
    (n/2)! for even n and sqrt(pi) n!! / 2^((n+1)/2) for odd n.
    """
    if n < 1:
        raise ParameterError("dimension must be at least 1")
    if n % 2 == 0:
        gamma = float(math.factorial(n // 2))
    else:
        gamma = math.sqrt(math.pi) * double_factorial(n) / 2.0 ** ((n + 1) / 2.0)
    return math.pi ** (n / 2.0) / gamma


def _kappa(n: int) -> float:
    return 1.0 if n % 2 == 1 else 2.0 / math.pi


def _ball_draw(n: int, eps: float, rng: np.random.Generator, size: int | None = None):
    """Uniform draw(s) on the radius-eps ball: Gaussian direction times
    the radial inverse CDF eps * U^(1/n).  Exact and rejection-free."""
    if size is None:
        g = rng.standard_normal(n)
        nrm = np.linalg.norm(g)
        while nrm == 0.0:  # pragma: no cover - probability zero
            g = rng.standard_normal(n)
            nrm = np.linalg.norm(g)
        radius = eps * rng.random() ** (1.0 / n)
        return (radius / nrm) * g
    g = rng.standard_normal((size, n))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    radius = eps * rng.random(size) ** (1.0 / n)
    return g * (radius[:, None] / nrm)


def sample_perturbation(scheme: SmoothingScheme, dims: tuple[int, ...],
                        rng: np.random.Generator) -> BlockVector:
    """One perturbation draw with independent per-block substreams."""
    if not scheme.active:
        raise ParameterError("the inactive scheme has nothing to sample")
    scheme.check_blocks(dims)
    streams = rng.spawn(len(dims))
    blocks = []
    for n_i, eps_i, sub in zip(dims, scheme.eps, streams):
        if scheme.kind == MSR:
            blocks.append(_ball_draw(n_i, eps_i, sub))
        else:
            blocks.append(sub.uniform(-eps_i, eps_i, size=n_i))
    return BlockVector.from_blocks(blocks)


def sample_perturbation_flat(scheme: SmoothingScheme, dims: tuple[int, ...],
                             rng: np.random.Generator,
                             size: int | None = None) -> np.ndarray:
    """Sequential-draw variant used in hot loops.

    Distributionally identical to :func:`sample_perturbation` (blocks are
    independent either way) but draws from the supplied generator in a
    fixed block order without spawning substreams, optionally vectorized
    over ``size`` independent perturbations.
    """
    scheme.check_blocks(dims)
    offsets = block_offsets(dims)
    n = int(offsets[-1])
    if size is None:
        out = np.empty(n)
        for i, (n_i, eps_i) in enumerate(zip(dims, scheme.eps)):
            s, e = offsets[i], offsets[i + 1]
            if scheme.kind == MSR:
                out[s:e] = _ball_draw(n_i, eps_i, rng)
            else:
                out[s:e] = rng.uniform(-eps_i, eps_i, size=n_i)
        return out
    out = np.empty((size, n))
    for i, (n_i, eps_i) in enumerate(zip(dims, scheme.eps)):
        s, e = offsets[i], offsets[i + 1]
        if scheme.kind == MSR:
            out[:, s:e] = _ball_draw(n_i, eps_i, rng, size=size)
        else:
            out[:, s:e] = rng.uniform(-eps_i, eps_i, size=(size, n_i))
    return out


def make_drawer(scheme: SmoothingScheme, dims: tuple[int, ...]):
    """Precompiled single-draw perturbation sampler for hot loops.

    Returns ``draw(rng) -> (n,)``; equivalent in distribution to
    :func:`sample_perturbation_flat` with precomputed index structures and
    a fixed number of generator calls per draw.
    """
    scheme.check_blocks(dims)
    offsets = block_offsets(dims)
    n = int(offsets[-1])
    dims_arr = np.asarray(dims, dtype=np.float64)
    eps_arr = np.asarray(scheme.eps, dtype=np.float64)
    eps_coord = np.repeat(eps_arr, dims)
    starts = offsets[:-1]
    rep = np.repeat(np.arange(len(dims)), dims)
    if scheme.kind == MCR:
        def draw(rng: np.random.Generator) -> np.ndarray:
            return eps_coord * rng.uniform(-1.0, 1.0, size=n)
        return draw
    inv_dims = 1.0 / dims_arr

    def draw(rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal(n)
        sq = np.add.reduceat(g * g, starts)
        sq[sq == 0.0] = 1.0
        radii = eps_arr * rng.random(len(dims_arr)) ** inv_dims
        return g * (radii / np.sqrt(sq))[rep]

    return draw


def smoothed_map_mc(stochastic_map: StochasticMap, x: BlockVector,
                    scheme: SmoothingScheme, M: int,
                    rng: np.random.Generator) -> BlockVector:
    """Monte-Carlo estimate of the smoothed map at ``x``.

    Averages M draws of the map at independently perturbed points (plain
    draws at ``x`` when the scheme is inactive); an unbiased estimator of
    the smoothed mean map, deterministic under a fixed seed.
    """
    if M < 1:
        raise ParameterError("M must be at least 1")
    stochastic_map._check(x)
    dims = stochastic_map.dims
    if scheme.active:
        scheme.check_blocks(dims)
        Z = sample_perturbation_flat(scheme, dims, rng, size=M)
        points = x.data[None, :] + Z
    else:
        points = np.broadcast_to(x.data, (M, x.n))
    if stochastic_map.sample_batch is not None:
        draws = np.asarray(stochastic_map.sample_batch(points, rng), dtype=np.float64)
        return x.with_data(draws.mean(axis=0))
    acc = np.zeros(x.n)
    for m in range(M):
        acc += stochastic_map.sample_flat(points[m], rng)
    return x.with_data(acc / M)


def msr_lipschitz(comp_bounds, dims, eps) -> SmoothedLipschitz:
    """Certified constant for ball smoothing.

    sqrt(N) ||C|| max_j kappa_j (n_j!!/(n_j-1)!!) / eps_j, with kappa_j = 1
    for odd n_j and 2/pi for even n_j.
    """
    C = np.asarray(comp_bounds, dtype=float)
    dims = tuple(int(d) for d in dims)
    eps = tuple(float(e) for e in eps)
    if not (C.size == len(dims) == len(eps)):
        raise ParameterError("comp_bounds, dims and eps must have matching lengths")
    if np.any(C <= 0) or any(e <= 0 for e in eps):
        raise ParameterError("bounds and eps must be positive")
    factor = max(_kappa(n) * double_factorial(n) / double_factorial(n - 1) / e
                 for n, e in zip(dims, eps))
    value = math.sqrt(len(dims)) * float(np.linalg.norm(C)) * factor
    return SmoothedLipschitz(value, MSR, tuple(C), dims, eps)


def mcr_lipschitz(comp_bounds, n_total: int, eps) -> SmoothedLipschitz:
    """Certified constant for cube smoothing: sqrt(n) ||C'|| / min_j eps_j."""
    C = np.asarray(comp_bounds, dtype=float)
    eps = tuple(float(e) for e in eps)
    if n_total < 1:
        raise ParameterError("total dimension must be at least 1")
    if np.any(C <= 0) or any(e <= 0 for e in eps):
        raise ParameterError("bounds and eps must be positive")
    value = math.sqrt(n_total) * float(np.linalg.norm(C)) / min(eps)
    return SmoothedLipschitz(value, MCR, tuple(C), (n_total,), eps)


def cube_density_l1(x: BlockVector, y: BlockVector, eps) -> float:
    """L1 distance between the two cube densities centered at x and y.

    Equals 2 (1 - prod_i prod_j (1 - |x_i(j) - y_i(j)| / (2 eps_i))) when
    every block satisfies ||x_i - y_i||_inf <= 2 eps_i, and 2 otherwise
    (disjoint supports).  Always at most (sqrt(n)/min_i eps_i) ||x - y||.
    """
    x.check_conforms(y.dims)
    eps = np.asarray(eps, dtype=float)
    if eps.size != x.n_blocks:
        raise ParameterError(f"{eps.size} eps for {x.n_blocks} blocks")
    if np.any(eps <= 0):
        raise ParameterError("eps must be positive")
    prod = 1.0
    for i in range(x.n_blocks):
        d = np.abs(x.block(i) - y.block(i))
        if np.max(d, initial=0.0) > 2.0 * eps[i]:
            return 2.0
        prod *= float(np.prod(1.0 - d / (2.0 * eps[i])))
    return 2.0 * (1.0 - prod)


def product_sum_bound_check(p) -> bool:
    """Whether 1 - prod(1 - p_i) <= sum p_i; true for all p in [0,1]^m."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ParameterError("components must lie in [0, 1]")
    return bool(1.0 - np.prod(1.0 - p) <= np.sum(p) + 1e-15)
