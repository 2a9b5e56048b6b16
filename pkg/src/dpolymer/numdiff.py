"""Central finite-difference stencils with one Richardson extrapolation level."""

import numpy as np

# offsets and weights of the lowest-order central stencil for d^n/dx^n
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def central_derivative(fun, x0, order, h, richardson=True):
    """n-th derivative of a scalar function by central differences.

    The plain stencil is O(h^2); with `richardson` a second evaluation at h/2
    upgrades it to O(h^4).
    """
    if order not in _STENCILS:
        raise ValueError(f"supported derivative orders are 1..4, got {order}")
    offs, wts = _STENCILS[order]

    def estimate(step):
        acc = 0.0
        for o, w in zip(offs, wts):
            acc += w * fun(x0 + o * step)
        return acc / step ** order

    d_h = estimate(h)
    if not richardson:
        return d_h
    d_h2 = estimate(h / 2)
    return (4.0 * d_h2 - d_h) / 3.0


def default_step(order, scale=1.0):
    """Step sizes balancing truncation against float64 roundoff per order."""
    base = {1: 1e-4, 2: 1e-3, 3: 4e-3, 4: 1e-2}[order]
    return base * max(1.0, abs(scale))


def richardson_sequence(fun, x0, order, h):
    """Return (estimate, raw pair) for diagnostics."""
    d = central_derivative(fun, x0, order, h, richardson=True)
    raw = central_derivative(fun, x0, order, h, richardson=False)
    return d, raw


def contour_derivatives(fun, x0, max_order, radius, nodes=64):
    """Derivatives 0..max_order of an analytic function via a trapezoidal contour.

    `fun` must accept complex arguments.  Spectrally accurate for smooth
    functions; the workhorse oracle where real-step differences hit roundoff.
    """
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = x0 + radius * np.exp(1j * theta)
    vals = np.asarray([fun(zz) for zz in z], dtype=complex)
    coeff = np.fft.fft(vals) / nodes
    out = []
    fact = 1.0
    for q in range(max_order + 1):
        if q > 0:
            fact *= q
        out.append(float(np.real(coeff[q] * fact / radius ** q)))
    return out
