"""Replication statistics: mean squared errors and confidence intervals."""
from __future__ import annotations

import numpy as np
from scipy import stats as sps

from ..errors import ParameterError

__all__ = ["confidence_interval"]


def confidence_interval(samples, level: float = 0.9) -> tuple[float, float]:
    """Normal-approximation two-sided CI for the mean of the samples.

    mean +- z_{(1+level)/2} * s / sqrt(R), with the R-1 divisor in s.
    Identical samples give the degenerate interval [mean, mean].
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size < 2:
        raise ParameterError("need at least two samples")
    if not 0.0 <= level < 1.0:
        raise ParameterError("level must lie in [0, 1)")
    mean = float(samples.mean())
    s = float(samples.std(ddof=1))
    if s == 0.0 or level == 0.0:
        return (mean, mean)
    z = float(sps.norm.ppf((1.0 + level) / 2.0))
    half = z * s / np.sqrt(samples.size)
    return (mean - half, mean + half)
