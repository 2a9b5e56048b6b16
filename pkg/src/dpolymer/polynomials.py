"""The recursive polynomial family p_n(t, a; r).

Defined by p_0 = 1 and p_n = d/da p_{n-1} + p_{n-1} (t - r psi_0(a)); these
play the role Hermite polynomials play for Gaussian integration by parts:
for T = sum of r i.i.d. log-weights with parameter a,

    d^n/da^n E^a[A] = E^a[A p_n(T, a; r)]        (so E[p_n(T)] = 0 for n >= 1),
    e^{lam s} (M(a)/M(a+lam))^r = sum_k lam^k p_k(s, a; r)/k!.

Internally the polynomial is held in the centered basis
u^alpha r^beta, u = t - r psi_0(a), with exact PsiPoly coefficients; the
recursion never leaves this basis, and alpha/2 + beta <= n/2 for every term
with equality on the leading u^n term (which has coefficient 1).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import coupling, mellin
from .errors import CapabilityError, DomainError
from .psialg import PsiPoly, psi_values

P_MAX_ORDER = 10


def _p_terms(n):
    """Term map {(alpha, beta): PsiPoly} for p_n in the centered basis."""
    terms = {(0, 0): PsiPoly.const(1.0)}
    for _ in range(n):
        nxt = {}

        def acc(key, poly):
            if not poly:
                return
            nxt[key] = nxt[key].add(poly) if key in nxt else poly

        for (alpha, beta), c in terms.items():
            acc((alpha, beta), c.deriv())
            if alpha >= 1:
                # d/da u^alpha = -alpha psi_1 u^{alpha-1} r
                acc((alpha - 1, beta + 1), c.mul(PsiPoly.psi(1)).scale(-alpha))
            acc((alpha + 1, beta), c)
        terms = nxt
    return terms


@dataclass(frozen=True)
class PnPoly:
    """p_n(t, a; r) with structured coefficients sum_j c_j(a) u^{a_j} r^{b_j}."""

    family: mellin.MellinFamily
    n: int
    a: float
    r: int

    def __post_init__(self):
        if not (0 <= self.n <= P_MAX_ORDER):
            raise CapabilityError(f"p_n supported for 0 <= n <= {P_MAX_ORDER}, got {self.n}")
        self.family.require_domain(self.a)
        if self.r < 1:
            raise ValueError("r must be a positive integer")

    def _psi_vals(self):
        terms = _p_terms(self.n)
        max_idx = max((c.max_index() for c in terms.values()), default=-1)
        return psi_values(self.family, self.a, max(max_idx, 0))

    def term_structure(self):
        """[(c_j value, a_j, b_j)] with c_j evaluated at a."""
        pv = self._psi_vals()
        out = []
        for (alpha, beta), c in sorted(_p_terms(self.n).items()):
            val = c.eval(pv)
            if val != 0.0:
                out.append((val, alpha, beta))
        return out

    def __call__(self, t):
        pv = self._psi_vals()
        u = np.asarray(t, dtype=float) - self.r * pv[0]
        total = np.zeros_like(u)
        for (alpha, beta), c in _p_terms(self.n).items():
            total = total + c.eval(pv) * u ** alpha * float(self.r) ** beta
        return total if total.ndim else float(total)


def build_p(family, n, a, r):
    """Construct p_n(., a; r) by the symbolic recursion in the centered basis."""
    return PnPoly(family, int(n), float(a), int(r))


def generating_check(family, a, r, s, lam, K):
    """|e^{lam s}(M(a)/M(a+lam))^r - sum_{k<=K} lam^k p_k(s,a;r)/k!|.

    Decays like |lam|^{K+1} as lam -> 0.
    """
    family.require_domain(a)
    if not family.contains(a + lam):
        lo, hi = family.domain()
        raise DomainError(f"a+lambda={a + lam} outside the open domain ({lo}, {hi})")
    if not (0 <= K <= P_MAX_ORDER):
        raise CapabilityError(f"K must be within 0..{P_MAX_ORDER}")
    lhs = math.exp(
        lam * s + r * float(np.real(mellin.log_mellin(family, a) - mellin.log_mellin(family, a + lam)))
    )
    total = 0.0
    for k in range(K + 1):
        total += lam ** k / math.factorial(k) * build_p(family, k, a, r)(s)
    return abs(lhs - total)


def _centered_moments_quad(family, a, max_order):
    """E[(log X - psi_0)^q], q = 0..max_order, by quadrature."""
    c = mellin.psi(family, 0, a)
    return [1.0] + [mellin.log_moment_quad(family, a, q, center=c) for q in range(1, max_order + 1)]


def _sum_moments(mu, r):
    """Central moments of a sum of r i.i.d. copies via binomial convolution."""
    out = list(mu)
    cur = list(mu)
    for _ in range(r - 1):
        nxt = [0.0] * len(mu)
        for q in range(len(mu)):
            nxt[q] = sum(math.comb(q, i) * cur[i] * mu[q - i] for i in range(q + 1))
        cur = nxt
    return cur if r > 1 else out


def mean_zero_check(family, n, a, r, route="quadrature", n_samples=10 ** 5, seed=0):
    """E[p_n(S_r, a; r)] where S_r is a sum of r i.i.d. log-weights.

    route="quadrature": exact via quadrature central moments convolved r-fold
    (intended for r <= 2); returns a float that should vanish.
    route="mc": inverse-CDF Monte Carlo; returns (estimate, stderr).
    """
    if n < 1:
        raise ValueError("n >= 1 required (p_0 has mean 1)")
    poly = build_p(family, n, a, r)
    if route == "quadrature":
        mu = _centered_moments_quad(family, a, n)
        ms = _sum_moments(mu, r)
        pv = poly._psi_vals()
        total = 0.0
        for (alpha, beta), c in _p_terms(n).items():
            total += c.eval(pv) * ms[alpha] * float(r) ** beta
        return total
    if route != "mc":
        raise ValueError(f"unknown route {route!r}")
    rng = np.random.default_rng(seed)
    t = np.zeros(n_samples)
    for _ in range(r):
        t += coupling.inverse_log(family, a, np.maximum(rng.random(n_samples), 2.0 ** -53))
    vals = poly(t)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))


def moment_norm(family, n, a, r, k=2, n_samples=10 ** 5, seed=0):
    """E[|p_n(S_r, a; r)|^k]^{1/k} by Monte Carlo (used by the growth test)."""
    rng = np.random.default_rng(seed)
    t = np.zeros(n_samples)
    for _ in range(r):
        t += coupling.inverse_log(family, a, np.maximum(rng.random(n_samples), 2.0 ** -53))
    vals = np.abs(build_p(family, n, a, r)(t)) ** k
    return float(vals.mean() ** (1.0 / k))


def term_exponent_check(n):
    """Verify a_j/2 + b_j <= n/2 for every term, with equality and coefficient
    one on the leading term."""
    terms = _p_terms(n)
    lead = terms.get((n, 0))
    if lead is None or lead.terms != {(): 1.0}:
        return False
    return all(alpha / 2.0 + beta <= n / 2.0 + 1e-12 for alpha, beta in terms)
