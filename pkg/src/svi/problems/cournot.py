"""Networked stochastic Cournot competition with regularization.

Five firms produce and sell over three market nodes.  Firm i's decision
block is (s_i1..s_iM, g_i1..g_iM): sales first, then generation.  Prices
are random and decrease in aggregate sales, p_j = a_j - b_j sbar_j^sigma,
production cost is linear, and each firm balances total generation with
total sales under per-node capacity bounds.  The sampled map is the
gradient of firm i's cost plus a regularization term eta_reg * x_i, which
makes the solved problem strongly monotone with modulus eta_reg.

For sigma > 1 the aggregate-sales power has unbounded curvature at zero,
so no useful global Lipschitz constant is available; the problem is
solved through the randomized smoothing schemes, whose certified
constants this module computes from analytic bounds over the enlarged
set.  Perturbed points may have slightly negative sales, where the price
terms are extended by clamping aggregate sales at zero (continuous, and
the only extension the power admits); the extension is exercised only
within the perturbation margin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blocks import BlockVector
from ..errors import ParameterError
from ..maps import MapConstants, StochasticMap
from ..projections import project_cartesian
from ..sets import CartesianSet, Polyhedron
from ..smoothing import MCR, MSR, SmoothedLipschitz, mcr_lipschitz, msr_lipschitz

__all__ = ["CournotSettings", "CournotInstance", "cournot_instance"]

N_FIRMS = 5
N_NODES = 3
PRICE_SLOPE_LO = 0.04
PRICE_SLOPE_HI = 0.05
PRICE_LEVEL_LO = 1.0
PRICE_LEVEL_HI = np.array([1.5, 2.0, 2.5])


@dataclass(frozen=True)
class CournotSettings:
    eps: float = 0.1            # smoothing size per firm
    eta_reg: float = 0.1        # regularization weight
    x0_kind: str = "P1"         # P1 = 0, P2 = half caps, P3 = full caps
    m_a: float = 1.0            # price-level multiplier
    cap: float = 1.0            # per-node generation bound
    cap_prime: float = 3.0      # per-node sales bound
    sigma: float = 1.1
    c_cost: float = 1.0         # linear generation cost coefficient

    def __post_init__(self):
        if self.sigma < 1.0:
            raise ParameterError("price exponent must be at least 1")
        for name in ("eps", "eta_reg", "m_a", "cap", "cap_prime"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.x0_kind not in ("P1", "P2", "P3"):
            raise ParameterError("x0_kind must be one of P1, P2, P3")
        if self.eps > min(self.cap, self.cap_prime):
            raise ParameterError("perturbation size must not exceed the capacity bounds")


def _firm_set(cap: float, cap_prime: float) -> Polyhedron:
    M = N_NODES
    rows = []
    rhs = []
    for j in range(M):          # sales caps
        e = np.zeros(2 * M)
        e[j] = 1.0
        rows.append(e)
        rhs.append(cap_prime)
    for j in range(M):          # generation caps
        e = np.zeros(2 * M)
        e[M + j] = 1.0
        rows.append(e)
        rhs.append(cap)
    bal = np.concatenate((-np.ones(M), np.ones(M)))  # sum g - sum s = 0
    rows.append(bal)
    rhs.append(0.0)
    rows.append(-bal)
    rhs.append(0.0)
    return Polyhedron(np.array(rows), np.array(rhs), nonneg=True)


@dataclass(frozen=True)
class CournotInstance:
    settings: CournotSettings
    stochastic_map: StochasticMap
    feasible: CartesianSet
    x0: BlockVector
    eta: float                  # regularization modulus of the solved map
    diameter: float
    nu_sample: float            # analytic bound on the sampling noise
    a_lo: np.ndarray
    a_hi: np.ndarray
    c_cost: np.ndarray          # (firms, nodes)
    dims: tuple[int, ...]

    @property
    def group_dims(self) -> tuple[int, ...]:
        return self.dims

    @property
    def n_agents(self) -> int:
        return N_FIRMS

    @property
    def a_mean(self) -> np.ndarray:
        return (self.a_lo + self.a_hi) / 2.0

    @property
    def nu_relaxed(self) -> float:
        """Noise constant under the relaxed rule nu >= diameter."""
        return float(max(self.nu_sample, self.diameter))

    def _enlarged_bounds(self, eps: float) -> tuple[float, float]:
        s = self.settings
        s_hi = s.cap_prime + eps
        sbar_hi = N_FIRMS * s_hi
        h = sbar_hi ** s.sigma + s.sigma * sbar_hi ** (s.sigma - 1.0) * s_hi
        return s_hi, h

    def comp_bounds(self, eps: float) -> tuple[float, ...]:
        """Per-firm sup bounds on the mean map over the eps-enlarged set."""
        s = self.settings
        if eps > min(s.cap, s.cap_prime):
            raise ParameterError("perturbation size exceeds the capacity bounds")
        s_hi, h = self._enlarged_bounds(eps)
        b_mean = (PRICE_SLOPE_LO + PRICE_SLOPE_HI) / 2.0
        sales = self.a_mean + b_mean * h + s.eta_reg * s_hi
        out = []
        for i in range(N_FIRMS):
            gen = self.c_cost[i] + s.eta_reg * (s.cap + eps)
            out.append(float(np.sqrt(np.sum(sales ** 2) + np.sum(gen ** 2))))
        return tuple(out)

    def smoothed_lipschitz(self, kind: str, eps: float | None = None) -> SmoothedLipschitz:
        eps = self.settings.eps if eps is None else float(eps)
        C = self.comp_bounds(eps)
        eps_blocks = (eps,) * N_FIRMS
        if kind == MSR:
            return msr_lipschitz(C, self.dims, eps_blocks)
        if kind == MCR:
            return mcr_lipschitz(C, sum(self.dims), eps_blocks)
        raise ParameterError(f"unknown smoothing kind {kind!r}")


def cournot_instance(settings: CournotSettings | None = None) -> CournotInstance:
    settings = settings or CournotSettings()
    M, N = N_NODES, N_FIRMS
    dims = (2 * M,) * N
    n = 2 * M * N
    sigma = settings.sigma
    eta_reg = settings.eta_reg
    a_lo = np.full(M, settings.m_a * PRICE_LEVEL_LO)
    a_hi = settings.m_a * PRICE_LEVEL_HI
    c_cost = np.broadcast_to(np.asarray(settings.c_cost, dtype=np.float64), (N, M)).copy()

    # block layout is (sales, generation) per firm: contiguous reshapes give
    # views onto the sales and generation panels
    a_span = a_hi - a_lo
    b_span = PRICE_SLOPE_HI - PRICE_SLOPE_LO

    def sample_flat(x, rng):
        a = a_lo + a_span * rng.random(M)
        b = PRICE_SLOPE_LO + b_span * rng.random(M)
        out = eta_reg * x
        O = out.reshape(N, 2 * M)
        S = x.reshape(N, 2 * M)[:, :M]
        sbar = np.maximum(S.sum(axis=0), 0.0)
        price = -a + b * sbar ** sigma
        slope = sigma * b * sbar ** (sigma - 1.0)
        O[:, :M] += price + slope * S
        O[:, M:] += c_cost
        return out

    def sample_batch(X, rng):
        m = X.shape[0]
        a = rng.uniform(a_lo, a_hi, size=(m, M))
        b = rng.uniform(PRICE_SLOPE_LO, PRICE_SLOPE_HI, size=(m, M))
        out = eta_reg * np.ascontiguousarray(X)
        O = out.reshape(m, N, 2 * M)
        S = np.ascontiguousarray(X).reshape(m, N, 2 * M)[:, :, :M]
        sbar = np.maximum(S.sum(axis=1), 0.0)          # (m, M)
        price = (-a + b * sbar ** sigma)[:, None, :]
        slope = (sigma * b * sbar ** (sigma - 1.0))[:, None, :]
        O[:, :, :M] += price + slope * S
        O[:, :, M:] += c_cost
        return out

    a_mean = (a_lo + a_hi) / 2.0
    b_mean = np.full(M, (PRICE_SLOPE_LO + PRICE_SLOPE_HI) / 2.0)

    def exact_mean_flat(x):
        if x.ndim == 2:
            m = x.shape[0]
            out = eta_reg * np.ascontiguousarray(x)
            O = out.reshape(m, N, 2 * M)
            S = np.ascontiguousarray(x).reshape(m, N, 2 * M)[:, :, :M]
            sbar = np.maximum(S.sum(axis=1), 0.0)
            price = (-a_mean + b_mean * sbar ** sigma)[:, None, :]
            slope = (sigma * b_mean * sbar ** (sigma - 1.0))[:, None, :]
            O[:, :, :M] += price + slope * S
            O[:, :, M:] += c_cost
            return out
        out = eta_reg * x
        O = out.reshape(N, 2 * M)
        S = x.reshape(N, 2 * M)[:, :M]
        sbar = np.maximum(S.sum(axis=0), 0.0)
        O[:, :M] += -a_mean + b_mean * sbar ** sigma \
            + sigma * b_mean * sbar ** (sigma - 1.0) * S
        O[:, M:] += c_cost
        return out

    # noise bound over the enlarged set: the map is affine in (a, b), so
    # Var(a) + h^2 Var(b) per sales coordinate, generation is noise-free
    s_hi = settings.cap_prime + settings.eps
    sbar_hi = N * s_hi
    h = sbar_hi ** sigma + sigma * sbar_hi ** (sigma - 1.0) * s_hi
    var_a = (a_hi - a_lo) ** 2 / 12.0
    var_b = (PRICE_SLOPE_HI - PRICE_SLOPE_LO) ** 2 / 12.0
    nu_sample = float(np.sqrt(N * np.sum(var_a + h ** 2 * var_b)))

    diameter = float(np.sqrt(N * M * (settings.cap ** 2 + settings.cap_prime ** 2)))
    constants = MapConstants(eta=eta_reg, noise_bound=max(nu_sample, diameter) ** 2)
    smap = StochasticMap(dims=dims, sample_flat=sample_flat,
                         exact_mean_flat=exact_mean_flat, sample_batch=sample_batch,
                         constants=constants, name="cournot")
    feasible = CartesianSet(tuple(_firm_set(settings.cap, settings.cap_prime)
                                  for _ in range(N)))
    feasible.validate_nonempty()

    factor = {"P1": 0.0, "P2": 0.5, "P3": 1.0}[settings.x0_kind]
    nominal = np.tile(np.concatenate((np.full(M, factor * settings.cap_prime),
                                      np.full(M, factor * settings.cap))), N)
    # the nominal corner points violate the generation/sales balance, so the
    # starting point is their projection onto the feasible set
    x0 = project_cartesian(feasible, BlockVector(nominal, dims))

    inst = CournotInstance(settings=settings, stochastic_map=smap, feasible=feasible,
                           x0=x0, eta=eta_reg, diameter=diameter, nu_sample=nu_sample,
                           a_lo=a_lo, a_hi=a_hi, c_cost=c_cost, dims=dims)
    return inst
