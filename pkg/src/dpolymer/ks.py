"""Kolmogorov-Smirnov helpers against exact CDFs."""

import math

import numpy as np
from scipy import special as sp


def ks_statistic(samples, cdf_values=None, cdf_fn=None):
    """Two-sided KS statistic of samples against a fully specified CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf_values if cdf_values is not None else cdf_fn(x), dtype=float)
    if cdf_values is not None:
        f = np.sort(f)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - f), np.max(f - (grid - 1.0 / n))))


def ks_critical_value(n, alpha=0.01):
    """Asymptotic Kolmogorov critical value K_alpha / sqrt(n)."""
    return float(sp.kolmogi(alpha)) / math.sqrt(n)


def ks_pass(samples, cdf_fn, alpha=0.01):
    d = ks_statistic(samples, cdf_fn=cdf_fn)
    return d <= ks_critical_value(len(samples), alpha), d
