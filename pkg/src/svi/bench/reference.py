"""Reference solutions by deterministic projected gradient on sample averages.

The expectation is replaced by the average over a fixed sample set that is
reproduced (common random numbers) at every evaluation point, making the
sample-average map deterministic; the fixed point of the projected update
is then located by constant-step projected gradient and certified by the
natural residual.  For smoothed problems a fixed perturbation batch is
paired with the map samples; the perturbation draws scale exactly with the
smoothing size, so references at different sizes share their randomness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blocks import BlockVector
from ..errors import ConvergenceError, ParameterError
from ..maps import StochasticMap
from ..projections import DEFAULT_DYKSTRA, DykstraConfig, compile_projector
from ..sets import CartesianSet
from ..smoothing import SmoothingScheme, sample_perturbation_flat

__all__ = ["saa_mean_map", "smoothed_saa_mean_map", "reference_solution", "ReferenceInfo"]


def saa_mean_map(smap: StochasticMap, M: int, seed: int):
    """Deterministic sample-average map with M fixed samples.

    Every evaluation reseeds the generator, so the same sample set is used
    at every point.  Requires the sampler to consume a fixed number of
    variates per draw (true of all maps in this package).
    """
    if M < 1:
        raise ParameterError("need at least one sample")
    if smap.sample_batch is not None:
        def fbar(x: np.ndarray) -> np.ndarray:
            rng = np.random.default_rng(seed)
            X = np.broadcast_to(x, (M, x.size))
            return np.asarray(smap.sample_batch(X, rng), dtype=np.float64).mean(axis=0)
    else:
        def fbar(x: np.ndarray) -> np.ndarray:
            rng = np.random.default_rng(seed)
            acc = np.zeros(x.size)
            for _ in range(M):
                acc += smap.sample_flat(x, rng)
            return acc / M
    return fbar


def smoothed_saa_mean_map(smap: StochasticMap, scheme: SmoothingScheme,
                          M: int, M_z: int, seed: int):
    """Sample average of the smoothed map with fixed perturbation pairs.

    Uses M = max(M, M_z) pairs (z_m, xi_m); the average over pairs is an
    unbiased estimator of the smoothed mean map and is deterministic given
    the seed.
    """
    if not scheme.active:
        return saa_mean_map(smap, M, seed)
    M_eff = max(M, M_z)
    z_rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5A)))
    Z = sample_perturbation_flat(scheme, smap.dims, z_rng, size=M_eff)
    if smap.sample_batch is not None:
        def fbar(x: np.ndarray) -> np.ndarray:
            rng = np.random.default_rng(seed)
            return np.asarray(smap.sample_batch(x[None, :] + Z, rng),
                              dtype=np.float64).mean(axis=0)
    else:
        def fbar(x: np.ndarray) -> np.ndarray:
            rng = np.random.default_rng(seed)
            acc = np.zeros(x.size)
            for m in range(M_eff):
                acc += smap.sample_flat(x + Z[m], rng)
            return acc / M_eff
    return fbar


@dataclass(frozen=True)
class ReferenceInfo:
    iterations: int
    residual: float
    gamma: float
    gamma_halvings: int


def estimate_lipschitz(fbar, feasible: CartesianSet, seed: int, n_pairs: int = 200,
                       spread: float = 1.0, dykstra: DykstraConfig | None = None,
                       safety: float = 1.5) -> float:
    """Empirical Lipschitz estimate of a deterministic map over the set.

    Samples pairs by projecting random perturbations onto the set and takes
    the worst difference ratio, inflated by a safety factor.  Used when the
    certified constant is too conservative to give a workable stepsize.
    """
    proj = compile_projector(feasible, dykstra or DEFAULT_DYKSTRA)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x11)))
    n = feasible.n
    best = 0.0
    for _ in range(n_pairs):
        x = proj(rng.uniform(-spread, spread, size=n))
        y = proj(x + rng.uniform(-spread, spread, size=n) * 0.1)
        d = np.linalg.norm(x - y)
        if d < 1e-12:
            continue
        best = max(best, float(np.linalg.norm(fbar(x) - fbar(y)) / d))
    if best == 0.0:
        best = 1.0
    return safety * best


def reference_solution(smap: StochasticMap, feasible: CartesianSet, M: int,
                       tol: float, seed: int, *, eta: float, lip: float | None = None,
                       smoothing: SmoothingScheme | None = None, M_z: int | None = None,
                       gamma: float | None = None, max_iters: int = 1_000_000,
                       dykstra: DykstraConfig | None = None,
                       x_start: BlockVector | None = None
                       ) -> tuple[BlockVector, ReferenceInfo]:
    """Fixed point of the projected sample-average map to the given residual.

    The constant step defaults to eta / lip^2; when no workable Lipschitz
    constant is supplied (``lip=None``) it is estimated empirically, since
    the step only affects speed while correctness is certified by the
    terminal natural residual.  A divergence guard halves the step when
    the residual grows persistently.
    """
    if M < 1000:
        raise ParameterError("reference oracle needs at least 1000 samples")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    dykstra = dykstra or DEFAULT_DYKSTRA
    if smoothing is not None and smoothing.active:
        fbar = smoothed_saa_mean_map(smap, smoothing, M, M_z or M, seed)
    else:
        fbar = saa_mean_map(smap, M, seed)
    proj = compile_projector(feasible, dykstra)
    if gamma is None:
        if lip is None:
            lip_hat = estimate_lipschitz(fbar, feasible, seed, dykstra=dykstra)
            gamma = eta / lip_hat ** 2
        else:
            gamma = eta / lip ** 2
    x = proj(np.zeros(feasible.n)) if x_start is None else x_start.data.copy()
    best = np.inf
    grew = 0
    halvings = 0
    for it in range(max_iters):
        x_next = proj(x - gamma * fbar(x))
        resid = float(np.linalg.norm(x - x_next))
        if resid <= tol:
            return BlockVector(x_next, feasible.dims), ReferenceInfo(
                iterations=it + 1, residual=resid, gamma=gamma, gamma_halvings=halvings)
        if resid < best:
            best = resid
            grew = 0
        else:
            grew += 1
            if grew >= 200:
                gamma /= 2.0
                halvings += 1
                best = resid
                grew = 0
                if halvings > 60:
                    break
        x = x_next
    raise ConvergenceError(
        f"no fixed point within {max_iters} iterations (residual {resid:.3e})",
        last_iterate=BlockVector(x, feasible.dims), residual=resid)
