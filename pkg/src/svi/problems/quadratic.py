"""Synthetic strongly monotone quadratic problem with a known solution.

The map is affine, Phi(x, xi) = Q x + b + xi, with symmetric positive
definite Q and additive zero-mean noise of known variance, over a box.
Its modulus and Lipschitz constant are the extreme eigenvalues of Q and
the solution is computed to machine-level residual by deterministic
projected gradient on the exact mean, which makes it the ground-truth
fixture for the engine and smoothing audits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blocks import BlockVector
from ..errors import ConvergenceError, ParameterError
from ..maps import MapConstants, StochasticMap
from ..sets import Box, CartesianSet

__all__ = ["QuadraticInstance", "quadratic_from", "quadratic_instance"]


@dataclass(frozen=True)
class QuadraticInstance:
    Q: np.ndarray
    b: np.ndarray
    feasible: CartesianSet
    stochastic_map: StochasticMap
    x_star: BlockVector
    eta: float
    lip: float
    noise_half: float          # per-coordinate uniform noise half-width
    dims: tuple[int, ...]

    @property
    def nu_sq(self) -> float:
        return self.b.size * self.noise_half ** 2 / 3.0

    @property
    def x0(self) -> BlockVector:
        return BlockVector.zeros(self.dims)


def _solve_box_vi(Q, b, lower, upper, tol=1e-12, max_iters=200_000):
    """Fixed point of x -> clip(x - gamma (Qx + b)) to the given residual."""
    eigs = np.linalg.eigvalsh(Q)
    gamma = eigs[0] / eigs[-1] ** 2
    x = np.clip(np.zeros_like(b), lower, upper)
    for _ in range(max_iters):
        x_next = np.clip(x - gamma * (Q @ x + b), lower, upper)
        if np.linalg.norm(x - x_next) <= tol:
            return x_next
        x = x_next
    raise ConvergenceError(
        f"projected gradient did not reach residual {tol}",
        last_iterate=x, residual=float(np.linalg.norm(x - x_next)))


def quadratic_from(Q, b, lower=-1.0, upper=1.0, noise_half: float = 1.0,
                   dims: tuple[int, ...] | None = None) -> QuadraticInstance:
    """Instance from explicit data; bounds may be scalars or vectors."""
    Q = np.asarray(Q, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if Q.shape != (n, n):
        raise ParameterError(f"Q has shape {Q.shape}, b has size {n}")
    if not np.allclose(Q, Q.T):
        raise ParameterError("Q must be symmetric")
    eigs = np.linalg.eigvalsh(Q)
    if eigs[0] <= 0:
        raise ParameterError("Q must be positive definite")
    if noise_half < 0:
        raise ParameterError("noise half-width must be nonnegative")
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (n,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (n,)).copy()
    dims = (n,) if dims is None else tuple(int(d) for d in dims)
    if sum(dims) != n:
        raise ParameterError("dims must partition the coordinates")
    offsets = np.concatenate(([0], np.cumsum(dims)))
    feasible = CartesianSet(tuple(
        Box(lower[offsets[i]:offsets[i + 1]], upper[offsets[i]:offsets[i + 1]])
        for i in range(len(dims))))

    def sample_flat(x, rng):
        xi = rng.uniform(-noise_half, noise_half, size=n) if noise_half > 0 else 0.0
        return Q @ x + b + xi

    def sample_batch(X, rng):
        out = X @ Q.T + b
        if noise_half > 0:
            out = out + rng.uniform(-noise_half, noise_half, size=X.shape)
        return out

    def exact_mean_flat(x):
        if x.ndim == 2:
            return x @ Q.T + b
        return Q @ x + b

    nu_sq = n * noise_half ** 2 / 3.0
    # sup of ||Qx + b|| over the box, coordinatewise worst case
    corner = np.abs(Q) @ np.maximum(np.abs(lower), np.abs(upper)) + np.abs(b)
    constants = MapConstants(eta=float(eigs[0]), lip=float(eigs[-1]),
                             comp_bounds=tuple(
                                 float(np.linalg.norm(corner[offsets[i]:offsets[i + 1]]))
                                 for i in range(len(dims))),
                             noise_bound=nu_sq)
    smap = StochasticMap(dims=dims, sample_flat=sample_flat,
                         exact_mean_flat=exact_mean_flat, sample_batch=sample_batch,
                         constants=constants, name="quadratic")
    x_star = BlockVector(_solve_box_vi(Q, b, lower, upper), dims)
    return QuadraticInstance(Q=Q, b=b, feasible=feasible, stochastic_map=smap,
                             x_star=x_star, eta=float(eigs[0]), lip=float(eigs[-1]),
                             noise_half=noise_half, dims=dims)


def quadratic_instance(n: int, seed: int, cond: float = 10.0, noise_half: float = 1.0,
                       dims: tuple[int, ...] | None = None) -> QuadraticInstance:
    """Random instance: spectrum spread over [1, cond], random offset."""
    if n < 1:
        raise ParameterError("dimension must be at least 1")
    if not 1.0 <= cond <= 10.0:
        raise ParameterError("condition number restricted to [1, 10]")
    rng = np.random.default_rng(seed)
    V = np.linalg.qr(rng.standard_normal((n, n)))[0]
    eigs = np.linspace(1.0, cond, n)
    Q = (V * eigs) @ V.T
    Q = (Q + Q.T) / 2.0
    b = rng.uniform(-2.0, 2.0, size=n)
    return quadratic_from(Q, b, noise_half=noise_half, dims=dims)
