import numpy as np
import pytest

from dpolymer import mellin


def five_families():
    """One representative of each kernel kind, shape parameters mixed."""
    return [
        mellin.exp_decay(1.0),
        mellin.exp_decay_inv(1.0),
        mellin.beta_kernel(2.0),
        mellin.beta_inv_kernel(2.0),
        mellin.beta_prime_kernel(2.0),
    ]


def interior_a(family, frac=0.5):
    """A parameter value comfortably inside the domain."""
    lo, hi = family.domain()
    if np.isinf(lo):
        return hi - 1.5
    if np.isinf(hi):
        return lo + 1.5
    return lo + frac * (hi - lo)


def a_grid(family, npts=11):
    """Interior grid used by the closed-form-vs-quadrature checks."""
    lo, hi = family.domain()
    if np.isinf(lo) and np.isinf(hi):
        return np.linspace(-4.0, 4.0, npts)
    if np.isinf(hi):
        return lo + np.linspace(0.3, 5.0, npts)
    if np.isinf(lo):
        return hi - np.linspace(0.3, 5.0, npts)
    pad = 0.1 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, npts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
