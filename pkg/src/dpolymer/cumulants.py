"""Empirical joint cumulants and the exact identities linking free-energy
cumulants to boundary statistics.

Two families of identity checks live here:

  * the cumulant expansion of log Z over its boundary decomposition
    kappa_k(logZ) = kappa_k(E) - (-1)^k kappa_k(S)
                    - sum_{j=1}^{k-1} C(k,j) (-1)^{k-j} kappa(logZ..j.., S..k-j..),
    with the stationarity inputs kappa_k(E) = n kappa_k(log R2) and
    kappa_k(S) = m kappa_k(log R1) tested against the psi closed forms;

  * the moment integration-by-parts formula
    E[(logZbar)^j p_k(S_r, a; r)]
      = sum_{l_1+..+l_j=k} k!/(l_1!..l_j!) E[prod_i sigma_{l_i}(t1 ^ r)],
    whose right side uses the exact per-environment sigma values, plus its
    r-variable one-dimensional ancestor d^n/da^n E^a[A] = E^a[A p_n(T,a;r)]
    checked purely by quadrature.

Estimators are plug-in (biased) with delete-1 jackknife standard errors;
identity checks always evaluate both sides on the same replicas.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import coupling, lattice, mellin, numdiff, partition, polynomials, quenched
from .errors import CapabilityError
from .setpartitions import (
    SetPartition,
    compositions,
    cumulant_weights,
    enumerate_partitions,
    joint_cumulant_from_moments,
)

__all__ = [
    "SetPartition", "enumerate_partitions", "joint_cumulant_from_moments",
    "CumulantEstimate", "joint_cumulant_empirical", "IdentityReport",
    "cumulant_identity_check", "ibp_moment_identity_check", "ibp_quadrature_check",
]


@dataclass(frozen=True)
class CumulantEstimate:
    value: float
    stderr: float
    k: int
    n_samples: int


def _plugin_with_loo(columns):
    """Plug-in joint cumulant of the given sample columns plus its delete-1
    jackknife replicates.

    columns: list of k arrays of shape (n,).  Returns (value, loo (n,)).
    """
    k = len(columns)
    n = columns[0].shape[0]
    block_cache = {}

    def block(b):
        if b not in block_cache:
            prod = columns[b[0] - 1].copy()
            for pos in b[1:]:
                prod = prod * columns[pos - 1]
            s = prod.sum()
            block_cache[b] = (s / n, (s - prod) / (n - 1))
        return block_cache[b]

    value = 0.0
    loo = np.zeros(n)
    for part, w in cumulant_weights(k):
        mean_prod = 1.0
        loo_prod = np.ones(n)
        for b in part.blocks:
            mb, lb = block(b)
            mean_prod *= mb
            loo_prod = loo_prod * lb
        value += w * mean_prod
        loo += w * loo_prod
    return value, loo


def _jackknife_se(loo):
    n = loo.shape[0]
    return math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))


def joint_cumulant_empirical(samples):
    """Plug-in joint cumulant of the k columns with jackknife standard error.

    Constant columns short-circuit to an exact zero for k >= 2 (a cumulant
    with a degenerate argument vanishes).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ValueError("samples must be an (n, k) matrix")
    n, k = samples.shape
    if n < 30:
        raise ValueError(f"need at least 30 samples, got {n}")
    if k >= 2 and np.any(samples.max(axis=0) == samples.min(axis=0)):
        return CumulantEstimate(0.0, 0.0, k, n)
    value, loo = _plugin_with_loo([samples[:, i] for i in range(k)])
    return CumulantEstimate(float(value), _jackknife_se(loo), k, n)


@dataclass
class IdentityReport:
    """Structured check result: both sides, their gap, and the noise scale."""

    name: str
    lhs: float
    rhs: float
    diff: float
    stderr: float
    passed: bool
    extras: dict | None = None

    def to_json(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return json.dumps(d, default=float)


def _identity_report(name, lhs, lhs_loo, rhs, rhs_loo, n_sigma=4.0, extras=None):
    diff_loo = lhs_loo - rhs_loo
    se = _jackknife_se(diff_loo)
    diff = lhs - rhs
    # an identity that holds exactly per-sample has se ~ 0; allow float slack
    passed = abs(diff) <= max(n_sigma * se, 1e-9 * max(1.0, abs(lhs), abs(rhs)))
    return IdentityReport(name, float(lhs), float(rhs), float(diff), float(se), bool(passed), extras)


def cumulant_identity_check(spec, m, n, k, replicas, seed, n_sigma=4.0):
    """Check the order-k cumulant expansion of log Z and its stationarity
    inputs on a common replica set.

    Returns a list of IdentityReports:
      expansion      lhs = kappa_k(logZ), rhs = boundary expansion
                     (exact by multilinearity of the plug-in estimator, so the
                     gap only measures float error)
      east-law       kappa_k(E_n) vs n psi_{k-1}(a2)
      south-law      kappa_k(S_m) vs m psi_{k-1}(a1)
    """
    if not 2 <= k <= 4:
        raise CapabilityError("cumulant expansion checked for 2 <= k <= 4")
    batch = lattice.sample_environment_batch(spec, m, n, seed, replicas, r_max=0)
    table = partition.log_partition_batch(batch)
    logz = table.logz[:, m, n]
    s_col = table.logz[:, m, 0]
    e_col = logz - s_col

    lhs, lhs_loo = _plugin_with_loo([logz] * k)
    rhs_val, rhs_loo = _plugin_with_loo([e_col] * k)
    sgn = (-1.0) ** k
    v, l = _plugin_with_loo([s_col] * k)
    rhs_val, rhs_loo = rhs_val - sgn * v, rhs_loo - sgn * l
    for j in range(1, k):
        coef = -math.comb(k, j) * (-1.0) ** (k - j)
        v, l = _plugin_with_loo([logz] * j + [s_col] * (k - j))
        rhs_val, rhs_loo = rhs_val + coef * v, rhs_loo + coef * l
    reports = [_identity_report(f"cumulant-expansion k={k}", lhs, lhs_loo, rhs_val, rhs_loo, n_sigma)]

    e_k, e_loo = _plugin_with_loo([e_col] * k)
    target_e = n * mellin.psi(spec.f2, k - 1, spec.a2)
    reports.append(_identity_report(
        f"east-law k={k}", e_k, e_loo, target_e, np.full_like(e_loo, target_e), n_sigma,
        extras={"per_site_psi": target_e / n},
    ))
    s_k, s_loo = _plugin_with_loo([s_col] * k)
    target_s = m * mellin.psi(spec.f1, k - 1, spec.a1)
    reports.append(_identity_report(
        f"south-law k={k}", s_k, s_loo, target_s, np.full_like(s_loo, target_s), n_sigma,
        extras={"per_site_psi": target_s / m},
    ))
    return reports


def ibp_moment_identity_check(spec, m, n, j, k, r, replicas, seed, n_sigma=4.0,
                              dtilde_table=None):
    """Monte Carlo check of the moment integration-by-parts formula at (j, k).

    The left side averages (logZbar)^j p_k(S_r, a1; r) over replicas; the
    right side averages the exact per-environment sigma products.  Common
    random numbers, difference reported against its replica stderr.
    """
    if j < 0 or k < 0 or j + k > 4:
        raise CapabilityError("checked for j, k >= 0 with j + k <= 4")
    batch = lattice.sample_environment_batch(spec, m, n, seed, replicas, r_max=r)
    orders = list(range(1, k + 1))
    if j >= 1 and orders:
        if dtilde_table is None:
            dtilde_table = coupling.DtildeLTable(spec.f1, spec.a1, max_order=k - 1)
        sigmas, table = quenched.sigma_batch(batch, orders, r, dtilde_table=dtilde_table)
    else:
        sigmas, table = {}, partition.log_partition_batch(batch)
    logz = table.logz[:, m, n]
    logzbar = logz - logz.mean()

    s_r = batch.south[:, :r].sum(axis=1)
    pk = polynomials.build_p(spec.f1, k, spec.a1, max(r, 1))(s_r) if r >= 1 else (
        np.ones_like(logz) if k == 0 else np.zeros_like(logz)
    )
    lhs_i = logzbar ** j * pk

    sigma_rows = {0: logzbar, **{l: np.asarray(v) for l, v in sigmas.items()}}
    if j == 0:
        rhs_i = np.zeros_like(lhs_i) if k >= 1 else np.ones_like(lhs_i)
    else:
        rhs_i = np.zeros_like(lhs_i)
        for comp in compositions(k, j):
            coef = math.factorial(k)
            prod = np.ones_like(lhs_i)
            for l in comp:
                coef //= math.factorial(l)
                prod = prod * sigma_rows[l]
            rhs_i = rhs_i + coef * prod
    diff_i = lhs_i - rhs_i
    se = float(diff_i.std(ddof=1) / math.sqrt(replicas))
    lhs, rhs = float(lhs_i.mean()), float(rhs_i.mean())
    passed = abs(lhs - rhs) <= max(n_sigma * se, 1e-9)
    return IdentityReport(
        f"moment-ibp j={j} k={k} r={r}", lhs, rhs, lhs - rhs, se, bool(passed),
        extras={"replicas": replicas, "lattice": [m, n]},
    )


def ibp_quadrature_check(family, a, n):
    """One-dimensional integration-by-parts oracle at A = (log X_1)^2, r = 2:

        d^n/da^n E^a[(log X_1)^2]  vs  E^a[(log X_1)^2 p_n(T, a; 2)],

    the left side by contour differentiation of complex-parameter quadrature,
    the right by real quadrature moments.  Returns the relative gap.
    """
    family.require_domain(a)
    if n < 1 or n > 4:
        raise CapabilityError("quadrature IBP check supports 1 <= n <= 4")

    def expect_logsq(z):
        num = mellin.mellin_weighted_quad(family, z, lambda u: u * u)
        den = mellin.mellin_weighted_quad(family, z, lambda u: 1.0)
        return num / den

    lo, hi = family.domain()
    room = min(a - lo if math.isfinite(lo) else math.inf, hi - a if math.isfinite(hi) else math.inf)
    radius = min(0.35 * room, 0.4) if math.isfinite(room) else 0.4
    lhs = numdiff.contour_derivatives(expect_logsq, a, n, radius, nodes=32)[n]

    psi0 = mellin.psi(family, 0, a)
    mq = mellin.mellin_weighted_quad(family, a, lambda u: 1.0)
    cmom = [mellin.mellin_weighted_quad(family, a, lambda u, q=q: (u - psi0) ** q) / mq
            for q in range(0, n + 1)]
    mixed = [mellin.mellin_weighted_quad(family, a, lambda u, q=q: u * u * (u - psi0) ** q) / mq
             for q in range(0, n + 1)]
    rhs = 0.0
    for (alpha, beta), c in polynomials._p_terms(n).items():
        cval = c.eval([mellin.psi(family, idx, a) for idx in range(max(c.max_index() + 1, 1))])
        inner = sum(math.comb(alpha, i) * mixed[i] * cmom[alpha - i] for i in range(alpha + 1))
        rhs += cval * 2.0 ** beta * inner
    return abs(lhs - rhs) / max(abs(lhs), 1e-12)
