"""Stochastic approximation for strongly monotone Cartesian variational
inequalities: projections, adaptive stepsize schedules, randomized
smoothing, test problems, and a benchmark harness."""

from .blocks import BlockVector
from .engine import RunConfig, RunRecord, polyak_conditions_audit, run_replications, run_sa, step
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    ParameterError,
    ProjectionError,
    SVIError,
)
from .maps import MapConstants, StochasticMap, natural_residual, sample_map
from .projections import DykstraConfig, project_block, project_cartesian
from .sets import Ball, Box, CartesianSet, Halfspace, Polyhedron, WholeSpace
from .smoothing import (
    SmoothedLipschitz,
    SmoothingScheme,
    ball_volume_coeff,
    cube_density_l1,
    double_factorial,
    mcr_lipschitz,
    msr_lipschitz,
    product_sum_bound_check,
    sample_perturbation,
    smoothed_map_mc,
)
from .stepsizes import (
    SchemeParams,
    StepsizeSchedule,
    asa_schedule,
    bound_schedules,
    dasa_schedule,
    error_sequence,
    harmonic_step,
    optimality_gap_check,
    recursive_schedule,
)

__version__ = "0.1.0"
