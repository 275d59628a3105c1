"""Stochastic bandwidth-sharing over a capacitated link network.

Five users route traffic over nine routes through twenty capacitated
links.  Each user pays a random logarithmic utility cost per route plus a
shared quadratic congestion cost on the aggregate link flows, giving the
map

    F(x) = -( xi_bar_r / (1 + x_r) )_r + 2 m_c A^T A x

over X = { x >= 0 : A x <= m_b b }.  The coupling makes X a single
projection block; stepsize groups still follow the user partition.

The default routing matrix is a fixed, documented 20 x 9 binary matrix:
one access link per user carrying all of that user's routes (placed on
the largest-capacity slots, which makes sqrt(n_users) * max_l b_l a valid
bound on the set diameter from the origin), the twelve lines of the
3 x 3 affine plane as backbone links (any two routes share at most one
backbone link, giving a well-conditioned A^T A with smallest eigenvalue
3), and three dedicated links. A^T A is verified positive definite at
construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blocks import BlockVector
from ..errors import ParameterError
from ..maps import MapConstants, StochasticMap
from ..sets import CartesianSet, Polyhedron

__all__ = ["BandwidthSettings", "BandwidthInstance", "bandwidth_instance",
           "default_topology", "USER_ROUTES", "LINK_CAPACITIES"]

USER_ROUTES: tuple[tuple[int, ...], ...] = ((0, 1, 2), (3, 4), (5,), (6,), (7, 8))

# cost means and half-widths of the per-route uniform demand weights
BASE_MEAN = np.array([1.0, 1.0, 1.0, 1.4, 1.4, 0.8, 1.6, 1.2, 1.2])
BASE_HALF = np.array([0.1, 0.1, 0.1, 0.2, 0.2, 0.05, 0.2, 0.1, 0.1])

LINK_CAPACITIES = np.array(
    [10, 15, 15, 20, 10, 10, 20, 30, 25, 15, 20, 15, 10, 10, 15, 15, 20, 20, 25, 40],
    dtype=np.float64)

# Rows 0-2: backbone (affine-plane rows); 3: user-3 access; 4-6: backbone
# (columns); 7: user-2 access; 8: user-5 access; 9-14: backbone
# (diagonals); 15-17: dedicated links for routes 3, 5, 6; 18: user-4
# access; 19: user-1 access.
_DEFAULT_A = np.array([
    [1, 1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 1, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 1, 1],
    [0, 0, 0, 0, 0, 1, 0, 0, 0],
    [1, 0, 0, 1, 0, 0, 1, 0, 0],
    [0, 1, 0, 0, 1, 0, 0, 1, 0],
    [0, 0, 1, 0, 0, 1, 0, 0, 1],
    [0, 0, 0, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1, 1],
    [1, 0, 0, 0, 1, 0, 0, 0, 1],
    [0, 1, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 1, 0],
    [1, 0, 0, 0, 0, 1, 0, 1, 0],
    [0, 1, 0, 1, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 1, 0, 1, 0, 0],
    [0, 0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0, 0],
    [1, 1, 1, 0, 0, 0, 0, 0, 0],
], dtype=np.float64)


def default_topology() -> np.ndarray:
    """The fixed default routing matrix (links x routes)."""
    return _DEFAULT_A.copy()


@dataclass(frozen=True)
class BandwidthSettings:
    """Scaling knobs: capacities, congestion weight, demand mean and spread."""

    m_b: float = 1.0
    m_c: float = 1.0
    m_xi: float = 1.0
    d_xi: float = 1.0

    def __post_init__(self):
        for name in ("m_b", "m_c", "m_xi", "d_xi"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")


@dataclass(frozen=True)
class BandwidthInstance:
    settings: BandwidthSettings
    routing: np.ndarray          # A, links x routes
    capacities: np.ndarray       # scaled, m_b * b
    xi_lo: np.ndarray
    xi_hi: np.ndarray
    stochastic_map: StochasticMap
    feasible: CartesianSet
    eta: float
    lip: float
    nu: float
    diameter: float
    group_dims: tuple[int, ...]  # per-user coordinate groups
    dims: tuple[int, ...]        # single projection block

    @property
    def x0(self) -> BlockVector:
        return BlockVector.zeros(self.dims)

    @property
    def n_agents(self) -> int:
        return len(self.group_dims)

    @property
    def xi_mean(self) -> np.ndarray:
        return (self.xi_lo + self.xi_hi) / 2.0

    def recompute_constants(self) -> tuple[float, float]:
        """(eta, lip) from the instance data; construction does not cache
        anything these could go stale against."""
        G = self.routing.T @ self.routing
        eigs = np.linalg.eigvalsh(G)
        xb = self.xi_mean
        eta = float(xb.min() / (1.0 + self.capacities.max()) ** 2
                    + 2.0 * self.settings.m_c * eigs[0])
        lip = float(xb.max() + 2.0 * self.settings.m_c * eigs[-1])
        return eta, lip

    def comp_bounds(self, eps: float) -> tuple[float, ...]:
        """Sup bound on ||F|| over the set enlarged by perturbations of
        size ``eps`` (single block).  Requires eps < 1 so the utility term
        stays defined (coordinates stay above -1)."""
        if not 0 < eps < 1:
            raise ParameterError("bandwidth map needs perturbation size below 1")
        two_ata = 2.0 * self.settings.m_c * (self.routing.T @ self.routing)
        xmax = self.capacities.max() + eps
        util = np.linalg.norm(self.xi_mean / (1.0 - eps))
        cong = np.linalg.norm(two_ata, 2) * np.sqrt(self.routing.shape[1]) * xmax
        return (float(util + cong),)


def bandwidth_instance(settings: BandwidthSettings | None = None,
                       topology: np.ndarray | None = None) -> BandwidthInstance:
    """Build the instance for the given scaling settings.

    ``topology`` overrides the default routing matrix; it must be binary
    with every route covered and A^T A positive definite.
    """
    settings = settings or BandwidthSettings()
    A = default_topology() if topology is None else np.asarray(topology, dtype=np.float64)
    caps = settings.m_b * LINK_CAPACITIES[: A.shape[0]]
    if A.ndim != 2 or A.shape[1] != BASE_MEAN.size:
        raise ParameterError(f"routing matrix must have {BASE_MEAN.size} columns")
    if caps.size != A.shape[0]:
        raise ParameterError("one capacity per link is required")
    if not np.all((A == 0) | (A == 1)):
        raise ParameterError("routing matrix entries must be 0 or 1")
    G = A.T @ A
    eigs = np.linalg.eigvalsh(G)
    if eigs[0] <= 1e-12:
        raise ParameterError("A^T A must be positive definite")

    n = A.shape[1]
    xi_lo = settings.m_xi * BASE_MEAN - settings.d_xi * BASE_HALF
    xi_hi = settings.m_xi * BASE_MEAN + settings.d_xi * BASE_HALF
    xi_mean = (xi_lo + xi_hi) / 2.0
    if xi_mean.min() <= 0:
        raise ParameterError("demand weight means must stay positive")
    two_ata = 2.0 * settings.m_c * G

    eta = float(xi_mean.min() / (1.0 + caps.max()) ** 2 + 2.0 * settings.m_c * eigs[0])
    lip = float(xi_mean.max() + 2.0 * settings.m_c * eigs[-1])
    # every user's routes share an access link, so per-user route sums are
    # capped by one capacity and the origin-anchored diameter is bounded by
    # sqrt(n_users) * max_l b_l
    diameter = float(np.sqrt(len(USER_ROUTES)) * caps.max())
    var_sum = float(np.sum((settings.d_xi * BASE_HALF) ** 2 / 3.0))
    nu = float(max(np.sqrt(var_sum), diameter * lip / np.sqrt(2.0)))

    xi_span = xi_hi - xi_lo

    def sample_flat(x, rng):
        xi = xi_lo + xi_span * rng.random(n)
        return -xi / (1.0 + x) + two_ata @ x

    def sample_batch(X, rng):
        xi = rng.uniform(xi_lo, xi_hi, size=X.shape)
        return -xi / (1.0 + X) + X @ two_ata.T

    def exact_mean_flat(x):
        if x.ndim == 2:
            return -xi_mean / (1.0 + x) + x @ two_ata.T
        return -xi_mean / (1.0 + x) + two_ata @ x

    constants = MapConstants(eta=eta, lip=lip, noise_bound=nu ** 2)
    smap = StochasticMap(dims=(n,), sample_flat=sample_flat,
                         exact_mean_flat=exact_mean_flat, sample_batch=sample_batch,
                         constants=constants, name="bandwidth")
    feasible = CartesianSet((Polyhedron(A, caps, nonneg=True),))
    feasible.validate_nonempty()
    group_dims = tuple(len(r) for r in USER_ROUTES)
    return BandwidthInstance(settings=settings, routing=A, capacities=caps,
                             xi_lo=xi_lo, xi_hi=xi_hi, stochastic_map=smap,
                             feasible=feasible, eta=eta, lip=lip, nu=nu,
                             diameter=diameter, group_dims=group_dims, dims=(n,))
