"""Projection-based stochastic approximation loops.

One iteration moves each coordinate against a fresh map sample scaled by
its stepsize and projects back onto the feasible product set.  Identical
stepsizes across blocks recover the centralized method; per-group
stepsizes give the distributed variant; an active smoothing scheme
samples the map at a freshly perturbed point each iteration.

Stepsize groups are decoupled from projection blocks: a run maps each
coordinate group to one schedule, so problems whose feasible set couples
all coordinates into a single projection block can still run per-agent
stepsizes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .errors import ParameterError, ProjectionError, SVIError
from .maps import StochasticMap
from .projections import DEFAULT_DYKSTRA, DykstraConfig, compile_projector
from .sets import CartesianSet
from .smoothing import SmoothingScheme, make_drawer
from .stepsizes import StepsizeSchedule

__all__ = [
    "RunConfig",
    "RunRecord",
    "ReplicationError",
    "step",
    "run_sa",
    "run_replications",
    "PolyakReport",
    "polyak_conditions_audit",
]


class ReplicationError(SVIError):
    """A replication failed; carries the seed of the failing run."""

    def __init__(self, message: str, seed: int):
        super().__init__(message)
        self.seed = seed


@dataclass
class RunConfig:
    """Everything one run needs.

    ``group_dims`` partitions the flat coordinates into stepsize groups
    (defaults to the projection blocks); ``schedules`` supplies one
    stepsize stream per group, or a single stream shared by all.
    """

    stochastic_map: StochasticMap
    feasible: CartesianSet
    schedules: list
    x0: BlockVector
    iterations: int
    seed: int
    group_dims: Optional[tuple[int, ...]] = None
    smoothing: SmoothingScheme = field(default_factory=SmoothingScheme.none)
    record_every: int = 10
    dykstra: DykstraConfig = field(default_factory=lambda: DEFAULT_DYKSTRA)

    def __post_init__(self):
        if self.iterations < 0:
            raise ParameterError("iterations must be nonnegative")
        if self.record_every < 1:
            raise ParameterError("record_every must be positive")
        dims = self.feasible.dims
        if self.stochastic_map.dims != dims:
            raise ParameterError("map and feasible set disagree on block structure")
        self.x0.check_conforms(dims)
        if self.group_dims is None:
            self.group_dims = dims
        self.group_dims = tuple(int(d) for d in self.group_dims)
        if sum(self.group_dims) != sum(dims):
            raise ParameterError("group dims must partition the flat coordinates")
        if isinstance(self.schedules, StepsizeSchedule):
            self.schedules = [self.schedules]
        if len(self.schedules) == 1 and len(self.group_dims) > 1:
            self.schedules = [self.schedules[0]] + [
                self.schedules[0].clone() for _ in range(len(self.group_dims) - 1)]
        if len(self.schedules) != len(self.group_dims):
            raise ParameterError(
                f"{len(self.schedules)} schedules for {len(self.group_dims)} groups")
        if self.smoothing.active:
            self.smoothing.check_blocks(dims)
        viol = self.feasible.max_violation(self.x0)
        if viol > 10 * self.dykstra.tol:
            raise ParameterError(f"x0 violates the feasible set by {viol:.3e}")


@dataclass
class RunRecord:
    """Snapshots and distances of one run."""

    ks: np.ndarray            # recorded iteration indices, k=0 first, final last
    iterates: np.ndarray      # (len(ks), n)
    sq_dist: Optional[np.ndarray]  # ||x_k - x_ref||^2 at recorded ks
    seed: int
    wall_time: float
    dims: tuple[int, ...]

    @property
    def final(self) -> BlockVector:
        return BlockVector(self.iterates[-1], self.dims)

    def iterate(self, idx: int) -> BlockVector:
        return BlockVector(self.iterates[idx], self.dims)


def _expand_gammas(gammas, dims: tuple[int, ...], n: int) -> np.ndarray:
    g = np.asarray(gammas, dtype=np.float64)
    if g.ndim == 0:
        return np.full(n, float(g))
    if g.shape == (len(dims),):
        return np.repeat(g, dims)
    if g.shape == (n,):
        return g
    raise ParameterError(f"stepsize shape {g.shape} matches neither blocks nor coordinates")


def step(x: BlockVector, f_sample: BlockVector, gammas, feasible: CartesianSet,
         cfg: DykstraConfig | None = None) -> BlockVector:
    """One projected update: per block, x_i <- Pi_i(x_i - gamma_i f_i)."""
    feasible.check_conforms(x)
    x.check_conforms(f_sample.dims)
    g = _expand_gammas(gammas, x.dims, x.n)
    if np.any(g <= 0):
        raise ParameterError("stepsizes must be positive")
    from .projections import project_cartesian

    return project_cartesian(feasible, x.with_data(x.data - g * f_sample.data), cfg)


def _snapshot_plan(K: int, every: int) -> np.ndarray:
    ks = list(range(0, K + 1, every))
    if ks[-1] != K:
        ks.append(K)
    return np.asarray(ks, dtype=np.int64)


def run_sa(cfg: RunConfig, x_ref: Optional[BlockVector] = None) -> RunRecord:
    """Run the iteration for ``cfg.iterations`` steps.

    Deterministic given the seed.  With an active smoothing scheme the map
    is sampled at a freshly perturbed point each iteration, the
    perturbation drawn before (and independently of) the map's own noise.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    K = cfg.iterations
    n = cfg.x0.n
    dims = cfg.feasible.dims
    proj = compile_projector(cfg.feasible, cfg.dykstra)
    group_map = np.repeat(np.arange(len(cfg.group_dims)), cfg.group_dims)
    if K > 0:
        per_group = np.stack(
            [sch.clone().materialize(K) for sch in cfg.schedules], axis=1)  # (K, G)
        gammas = np.ascontiguousarray(per_group[:, group_map])  # (K, n)
    ks = _snapshot_plan(K, cfg.record_every)
    snaps = np.empty((ks.size, n))
    ref = None if x_ref is None else np.asarray(x_ref.data, dtype=np.float64)
    sq = None if ref is None else np.empty(ks.size)

    x = cfg.x0.data.copy()
    snap_i = 0
    if ks[snap_i] == 0:
        snaps[snap_i] = x
        if sq is not None:
            d = x - ref
            sq[snap_i] = d @ d
        snap_i += 1
    draw_z = make_drawer(cfg.smoothing, dims) if cfg.smoothing.active else None
    sample_flat = cfg.stochastic_map.sample_flat
    for k in range(K):
        xe = x + draw_z(rng) if draw_z is not None else x
        phi = sample_flat(xe, rng)
        try:
            x = proj(x - gammas[k] * phi)
        except ProjectionError as exc:
            raise ProjectionError(
                f"iteration {k}: {exc}", last_iterate=exc.last_iterate,
                residual=exc.residual, block=exc.block) from exc
        if snap_i < ks.size and ks[snap_i] == k + 1:
            snaps[snap_i] = x
            if sq is not None:
                d = x - ref
                sq[snap_i] = d @ d
            snap_i += 1
    return RunRecord(ks=ks, iterates=snaps, sq_dist=sq, seed=cfg.seed,
                     wall_time=time.perf_counter() - t0, dims=dims)


def run_replications(cfg: RunConfig, R: int, base_seed: int,
                     x_ref: Optional[BlockVector] = None):
    """R independent runs with seeds base_seed .. base_seed+R-1.

    Returns the per-run records plus the mean-squared-error trajectory
    over the recorded iterations (requires a reference point).
    """
    if R < 1:
        raise ParameterError("need at least one replication")
    records = []
    for i in range(R):
        seed = base_seed + i
        try:
            records.append(run_sa(replace(cfg, seed=seed), x_ref))
        except SVIError as exc:
            raise ReplicationError(f"replication with seed {seed} failed: {exc}",
                                   seed=seed) from exc
    mse = None
    if x_ref is not None:
        mse = np.mean([rec.sq_dist for rec in records], axis=0)
    return records, mse


@dataclass(frozen=True)
class PolyakReport:
    """Heuristic audit of the almost-sure convergence conditions.

    The three requirements on the contraction/noise sequences are checked
    as finite-horizon trends: the contraction terms must enter and stay in
    [0, 1], their partial sums must keep growing (tail over the second
    half at least 5% of the first half), the noise terms must be summable
    (tail under 5% of the head), and the noise-to-contraction ratio must
    decay (last-decile mean under 20% of the first-decile mean).
    """

    alpha_range_index: int
    alpha_in_range: bool
    alpha_diverges: bool
    mu_summable: bool
    ratio_decays: bool
    sum_alpha: float
    sum_mu: float

    @property
    def passed(self) -> bool:
        return (self.alpha_in_range and self.alpha_diverges
                and self.mu_summable and self.ratio_decays)


def polyak_conditions_audit(alpha, mu) -> PolyakReport:
    alpha = np.asarray(alpha, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if alpha.shape != mu.shape or alpha.ndim != 1 or alpha.size < 10:
        raise ParameterError("alpha and mu must be equal-length vectors (>= 10 terms)")
    K = alpha.size
    in_range = (alpha >= 0) & (alpha <= 1)
    idx = K
    for k in range(K - 1, -1, -1):
        if not in_range[k]:
            break
        idx = k
    alpha_in_range = idx < K
    half = K // 2
    head_a, tail_a = float(alpha[:half].sum()), float(alpha[half:].sum())
    alpha_diverges = bool(np.all(mu >= 0)) and tail_a >= 0.05 * max(head_a, 1e-300)
    head_m, tail_m = float(mu[:half].sum()), float(mu[half:].sum())
    mu_summable = tail_m <= 0.05 * max(head_m, 1e-300)
    dec = max(K // 10, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(alpha > 0, mu / np.where(alpha > 0, alpha, 1.0), np.inf)
    ratio_decays = float(np.mean(ratio[-dec:])) <= 0.2 * max(float(np.mean(ratio[:dec])), 1e-300)
    return PolyakReport(
        alpha_range_index=idx,
        alpha_in_range=alpha_in_range,
        alpha_diverges=alpha_diverges,
        mu_summable=mu_summable,
        ratio_decays=ratio_decays,
        sum_alpha=float(alpha.sum()),
        sum_mu=float(mu.sum()),
    )
