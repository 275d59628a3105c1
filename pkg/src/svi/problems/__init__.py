"""Benchmark problem constructors.

Each factory yields an instance bundling a stochastic map, a feasible
Cartesian set, certified constants, stepsize groups, and starting points.
"""

from .bandwidth import BandwidthInstance, BandwidthSettings, bandwidth_instance, default_topology
from .cournot import CournotInstance, CournotSettings, cournot_instance
from .quadratic import QuadraticInstance, quadratic_from, quadratic_instance

__all__ = [
    "BandwidthInstance",
    "BandwidthSettings",
    "bandwidth_instance",
    "default_topology",
    "CournotInstance",
    "CournotSettings",
    "cournot_instance",
    "QuadraticInstance",
    "quadratic_from",
    "quadratic_instance",
]
