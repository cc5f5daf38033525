"""Shared summary statistics for Monte Carlo results."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats as sps

__all__ = ["Summary", "t_interval"]


@dataclass(frozen=True)
class Summary:
    """Mean with a Student-t confidence interval."""

    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    level: float
    n: int


def t_interval(samples, level: float = 0.975) -> Summary:
    """Student-t confidence interval at the given two-sided confidence level."""
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    x = np.asarray(samples, dtype=float)
    if x.size < 1:
        raise ValueError("need at least one sample")
    mean = float(x.mean())
    if x.size == 1:
        return Summary(mean, math.inf, -math.inf, math.inf, level, 1)
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    half = float(sps.t.ppf(0.5 + level / 2.0, df=x.size - 1)) * se
    return Summary(mean, se, mean - half, mean + half, level, x.size)
