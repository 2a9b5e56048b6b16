"""Named verification checks behind the `verify` CLI subcommand.

Every check wraps an invariant owned by one of the library modules; the CLI
adds no mathematics of its own.  Each check returns (name, passed, detail).
"""

import time

import numpy as np

from . import coupling, cumulants, lattice, mellin, partition, polynomials, quenched

DEFAULT_FAMILIES = [
    mellin.exp_decay(1.0),
    mellin.exp_decay_inv(1.0),
    mellin.beta_kernel(2.0),
    mellin.beta_inv_kernel(2.0),
    mellin.beta_prime_kernel(2.0),
]
DEFAULT_FAMILY_A = [1.5, -1.5, 1.5, -1.5, -0.8]


def _family_grid(family, npts=11):
    lo, hi = family.domain()
    if np.isinf(lo) and np.isinf(hi):
        return np.linspace(-4.0, -0.4, npts)
    if np.isinf(hi):
        return np.linspace(lo + 0.3, lo + 5.0, npts)
    if np.isinf(lo):
        return np.linspace(hi - 5.0, hi - 0.3, npts)
    pad = 0.1 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, npts)


def check_mellin_closed_forms():
    worst = 0.0
    for fam in DEFAULT_FAMILIES:
        for a in _family_grid(fam):
            closed = mellin.mellin_transform(fam, a)
            quad = mellin.mellin_transform_quad(fam, a)
            worst = max(worst, abs(closed / quad - 1.0))
    return "mellin-closed-forms", worst <= 1e-9, f"max rel err {worst:.2e} (tol 1e-9)"


def check_psi_derivatives():
    worst = 0.0
    for fam in DEFAULT_FAMILIES:
        for a in _family_grid(fam, npts=5):
            for k in range(4):
                oracle = mellin.log_mellin_derivative_contour(fam, a, k + 1)
                err = abs(mellin.psi(fam, k, a) - oracle) / max(abs(oracle), 1e-9)
                worst = max(worst, err)
    return "psi-vs-numeric-derivative", worst <= 1e-5, f"max rel err {worst:.2e} (tol 1e-5)"


def check_density_normalization():
    worst = 0.0
    for fam, a in zip(DEFAULT_FAMILIES, DEFAULT_FAMILY_A):
        worst = max(worst, abs(mellin.density_norm_quad(fam, a) - 1.0))
    return "density-normalization", worst <= 1e-8, f"max |int rho - 1| {worst:.2e} (tol 1e-8)"


def check_coupling_roundtrip():
    worst = 0.0
    ps = np.arange(0.01, 1.0, 0.01)
    for fam, a in zip(DEFAULT_FAMILIES, DEFAULT_FAMILY_A):
        xs = coupling.inverse(fam, a, ps)
        worst = max(worst, float(np.max(np.abs(coupling.cdf(fam, a, xs) - ps))))
    return "inverse-cdf-roundtrip", worst <= 1e-10, f"max |F(H(p))-p| {worst:.2e} (tol 1e-10)"


def check_hn_zero_integrals():
    worst = 0.0
    for fam, a in zip(DEFAULT_FAMILIES, DEFAULT_FAMILY_A):
        for n in (1, 2, 3, 4):
            worst = max(worst, abs(coupling.HPoly(fam, n).integral_against_weight(a)))
    return "h_n-zero-integrals", worst <= 1e-8, f"max |int h_n rho| {worst:.2e} (tol 1e-8)"


def check_tilde_routes():
    worst = {1: 0.0, 2: 0.0}
    for fam, a in zip(DEFAULT_FAMILIES, DEFAULT_FAMILY_A):
        lo, hi = fam.support()
        xs = np.linspace(lo + 0.25 * (min(hi, 4.0) - lo), min(hi, 4.0) * 0.8, 3)
        for x in xs:
            for k in (1, 2):
                rec = coupling.tilde_deriv_L(fam, k, a, float(x))
                fd = coupling.tilde_deriv_L(fam, k, a, float(x), route="fd")
                worst[k] = max(worst[k], abs(rec - fd) / max(abs(rec), 1e-9))
    ok = worst[1] <= 1e-4 and worst[2] <= 1e-3
    return "dtilde-two-routes", ok, f"rel err k=1 {worst[1]:.2e} (tol 1e-4), k=2 {worst[2]:.2e} (tol 1e-3)"


def check_hypothesis_bounds(points_per_decade=21, n_a=5):
    details = []
    ok = True
    for fam in DEFAULT_FAMILIES:
        reports = coupling.bound_check_multi(
            fam, (0, 1, 2), points_per_decade=points_per_decade, n_a=n_a
        )
        for k, rep in reports.items():
            good = rep.finite and rep.outer_stability < 2.0
            ok = ok and good
            if k == 2:
                details.append(f"{fam.label()} max {rep.max_ratio:.3g} stab {rep.outer_stability:.2f}")
    return "hypothesis-growth-bounds", ok, "; ".join(details)


def check_pn_identities():
    worst_mean = 0.0
    for fam, a in zip(DEFAULT_FAMILIES, DEFAULT_FAMILY_A):
        for r in (1, 2):
            for n in (1, 2, 3, 4):
                worst_mean = max(worst_mean, abs(polynomials.mean_zero_check(fam, n, a, r)))
    resid = polynomials.generating_check(mellin.exp_decay(1.0), 2.0, 1, 0.5, 0.01, 6)
    ok = worst_mean <= 1e-8 and resid <= 1e-12
    return "p_n-identities", ok, f"max |E p_n| {worst_mean:.2e} (tol 1e-8); gen residual {resid:.2e} (tol 1e-12)"


def check_ibp_quadrature(spec):
    worst = 0.0
    for n in (1, 2):
        worst = max(worst, cumulants.ibp_quadrature_check(spec.f1, spec.a1, n))
    return "ibp-quadrature", worst <= 1e-6, f"max rel err {worst:.2e} (tol 1e-6)"


def check_dp_oracle(spec, seeds=25):
    worst = 0.0
    shapes = [(2, 2), (3, 4), (6, 6), (5, 1), (1, 5), (4, 6)]
    for seed in range(seeds):
        m, n = shapes[seed % len(shapes)]
        env = lattice.sample_environment(spec, m, n, seed)
        table = partition.log_partition(env)
        worst = max(worst, abs(float(table.corner()) - partition.brute_force_logZ(env)))
    return "dp-vs-enumeration", worst <= 1e-9, f"max |diff| {worst:.2e} (tol 1e-9)"


def check_nsew(spec, samples=200, shape=(32, 32), seed=5):
    batch = lattice.sample_environment_batch(spec, shape[0], shape[1], seed, samples, r_max=0)
    table = partition.log_partition_batch(batch)
    worst = 0.0
    for i in range(samples):
        env = batch.environment(i)
        sub = partition.PartitionTable(table.logz[i], partition.Direction.FORWARD, env.m, env.n)
        d = partition.nsew_decompose(env, sub)
        worst = max(worst, abs(d.west_north - d.south_east), abs(d.west_north - float(sub.corner())))
    return "nsew-identity", worst <= 1e-9, f"max residual {worst:.2e} (tol 1e-9)"


def check_burke(spec, replicas=2000, shape=(32, 32), seed=11):
    rep = partition.burke_test(spec, shape[0], shape[1], replicas, seed)
    ok = rep.passes(0.95)
    return "burke-down-right", ok, (
        f"KS pass {rep.ks_pass_fraction:.1%}, corr pass {rep.corr_pass_fraction:.1%} "
        f"(both need >= 95%)"
    )


def check_exit_oracle(spec, seeds=20):
    worst = 0.0
    shapes = [(3, 3), (4, 2), (2, 4), (5, 5), (1, 4)]
    for seed in range(seeds):
        m, n = shapes[seed % len(shapes)]
        env = lattice.sample_environment(spec, m, n, seed)
        fwd = partition.log_partition(env)
        rev = quenched.reverse_partition(env)
        ds = quenched.exit_distribution(env, fwd, rev, "south")
        dw = quenched.exit_distribution(env, fwd, rev, "west")
        qs, qw = partition.brute_force_exit(env)
        worst = max(worst, float(np.max(np.abs(ds.probs - qs))), float(np.max(np.abs(dw.probs - qw))))
    return "exit-distribution-oracle", worst <= 1e-10, f"max |diff| {worst:.2e} (tol 1e-10)"


def check_sigma_consistency(spec, envs=20, shape=(8, 8), seed=3):
    worst = {1: 0.0, 2: 0.0}
    for i in range(envs):
        env = lattice.sample_environment(spec, shape[0], shape[1], seed + i)
        worst[1] = max(worst[1], quenched.deriv_consistency_check(env, spec, 1, shape[0]))
        worst[2] = max(worst[2], quenched.deriv_consistency_check(env, spec, 2, shape[0]))
    ok = worst[1] <= 1e-4 and worst[2] <= 1e-2
    return "sigma-vs-coupled-fd", ok, (
        f"rel err k=1 {worst[1]:.2e} (tol 1e-4), k=2 {worst[2]:.2e} (tol 1e-2)"
    )


def check_cumulant_identities(spec, shape=(16, 16), replicas=4000, seed=17):
    reports = []
    for k in (2, 3):
        reports.extend(cumulants.cumulant_identity_check(spec, shape[0], shape[1], k, replicas, seed))
    reports.append(cumulants.ibp_moment_identity_check(
        spec, shape[0], shape[1], 1, 1, shape[0], replicas, seed
    ))
    ok = all(r.passed for r in reports)
    detail = "; ".join(f"{r.name}: diff {r.diff:+.2e} vs se {r.stderr:.2e}" for r in reports[-3:])
    return "cumulant-and-ibp-identities", ok, detail


def run_verify(spec, fast=False, printer=print):
    """Run the whole suite; prints one line per check, returns overall pass."""
    checks = [
        check_mellin_closed_forms,
        check_psi_derivatives,
        check_density_normalization,
        check_coupling_roundtrip,
        check_hn_zero_integrals,
        check_tilde_routes,
        check_pn_identities,
        lambda: check_ibp_quadrature(spec),
        lambda: check_dp_oracle(spec, seeds=10 if fast else 25),
        lambda: check_nsew(spec, samples=50 if fast else 200),
        lambda: check_burke(spec, replicas=500 if fast else 2000),
        lambda: check_exit_oracle(spec, seeds=8 if fast else 20),
        lambda: check_sigma_consistency(spec, envs=5 if fast else 20),
        lambda: check_cumulant_identities(spec, replicas=1000 if fast else 4000),
        lambda: check_hypothesis_bounds(points_per_decade=7 if fast else 21, n_a=3 if fast else 5),
    ]
    all_ok = True
    for fn in checks:
        t0 = time.time()
        name, ok, detail = fn()
        all_ok = all_ok and ok
        status = "PASS" if ok else "FAIL"
        printer(f"[{status}] {name:28s} {detail} ({time.time() - t0:.1f}s)")
    return all_ok
