import math

import numpy as np
import pytest

from dpolymer import cumulants, lattice, mellin, partition, quenched, coupling
from dpolymer.errors import CapabilityError
from dpolymer.setpartitions import BELL


class TestPartitions:
    @pytest.mark.parametrize("k,count", [(1, 1), (2, 2), (3, 5), (5, 52), (8, 4140)])
    def test_bell_counts(self, k, count):
        parts = cumulants.enumerate_partitions(k)
        assert len(parts) == count == BELL[k]
        seen = set()
        for p in parts:
            assert p.covers(k)
            key = tuple(sorted(p.blocks))
            assert key not in seen
            seen.add(key)

    def test_capability(self):
        with pytest.raises(CapabilityError):
            cumulants.enumerate_partitions(9)


class TestEmpirical:
    def test_order_two_is_plugin_covariance(self, rng):
        x = rng.normal(size=500)
        y = 0.3 * x + rng.normal(size=500)
        est = cumulants.joint_cumulant_empirical(np.stack([x, y], axis=1))
        plug = np.mean(x * y) - np.mean(x) * np.mean(y)
        assert est.value == pytest.approx(plug, rel=1e-12)

    def test_gamma_third_cumulant(self, rng):
        g = rng.gamma(1.0, 1.0, 10 ** 5)
        est = cumulants.joint_cumulant_empirical(np.stack([g] * 3, axis=1))
        assert abs(est.value - 2.0) <= 4 * est.stderr

    def test_normal_higher_cumulants_vanish(self, rng):
        z = rng.standard_normal(10 ** 5)
        for k in (3, 4):
            est = cumulants.joint_cumulant_empirical(np.stack([z] * k, axis=1))
            assert abs(est.value) <= 4 * est.stderr

    def test_independent_columns_vanish(self, rng):
        cols = rng.normal(size=(20000, 3))
        est = cumulants.joint_cumulant_empirical(cols)
        assert abs(est.value) <= 4 * est.stderr

    def test_degenerate_column(self, rng):
        x = rng.normal(size=200)
        c = np.full(200, 3.7)
        est = cumulants.joint_cumulant_empirical(np.stack([x, c], axis=1))
        assert est.value == 0.0 and est.stderr == 0.0

    def test_multilinearity_exact(self, rng):
        x, y, z = rng.normal(size=(3, 400))
        lhs = cumulants.joint_cumulant_empirical(np.stack([2.0 * x + 3.0 * y, z], axis=1)).value
        rhs = (2.0 * cumulants.joint_cumulant_empirical(np.stack([x, z], axis=1)).value
               + 3.0 * cumulants.joint_cumulant_empirical(np.stack([y, z], axis=1)).value)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_stderr_scaling(self, rng):
        g = rng.gamma(2.0, 1.0, 4 * 10 ** 4)
        se_small = cumulants.joint_cumulant_empirical(np.stack([g[:10 ** 4]] * 2, axis=1)).stderr
        se_large = cumulants.joint_cumulant_empirical(np.stack([g] * 2, axis=1)).stderr
        assert se_small / se_large == pytest.approx(2.0, rel=0.35)

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            cumulants.joint_cumulant_empirical(np.zeros((10, 2)))


class TestCumulantIdentity:
    @pytest.mark.parametrize("kind,mu,th", [("ig", 2, 1), ("ib", 2, 1)])
    @pytest.mark.parametrize("k", [2, 3])
    def test_expansion_and_laws(self, kind, mu, th, k):
        spec = lattice.make_model(kind, mu, th)
        reports = cumulants.cumulant_identity_check(spec, 8, 8, k, 3000, 101)
        by_name = {r.name.split()[0]: r for r in reports}
        exp = by_name[f"cumulant-expansion"]
        # multilinearity makes the expansion exact on common samples
        assert abs(exp.diff) <= 1e-9 * max(1.0, abs(exp.lhs))
        assert all(r.passed for r in reports), [(r.name, r.diff, r.stderr) for r in reports]

    def test_variance_formula_k2(self):
        # Var(logZ) = n psi_1(a2) - m psi_1(a1) + 2 E[sigma_1(t1 ^ m)]
        spec = lattice.make_model("ig", 2, 1)
        m = n = 8
        batch = lattice.sample_environment_batch(spec, m, n, 55, 3000)
        table = coupling.DtildeLTable(spec.f1, spec.a1, max_order=0, n_core=301)
        sig, fwd = quenched.sigma_batch(batch, [1], m, dtilde_table=table)
        logz = fwd.logz[:, m, n]
        lhs = logz.var(ddof=1)
        rhs_i = (n * mellin.psi(spec.f2, 1, spec.a2) - m * mellin.psi(spec.f1, 1, spec.a1)
                 + 2.0 * sig[1])
        se = math.sqrt(logz.size * np.var(
            (logz - logz.mean()) ** 2 - 2.0 * sig[1], ddof=1
        )) / logz.size
        assert abs(lhs - rhs_i.mean()) <= 4 * se


class TestMomentIBP:
    def test_j1_k0_centering(self):
        spec = lattice.make_model("g", 1, 0.5)
        rep = cumulants.ibp_moment_identity_check(spec, 6, 6, 1, 0, 6, 500, 3)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs == pytest.approx(0.0, abs=1e-12)

    def test_j0_mean_zero(self):
        spec = lattice.make_model("g", 1, 0.5)
        rep = cumulants.ibp_moment_identity_check(spec, 6, 6, 0, 2, 6, 4000, 3)
        assert rep.rhs == 0.0
        assert rep.passed

    @pytest.mark.parametrize("jk", [(1, 1), (2, 1), (1, 2)])
    def test_identity_small_lattice(self, jk):
        j, k = jk
        spec = lattice.make_model("ig", 2, 1)
        rep = cumulants.ibp_moment_identity_check(spec, 8, 8, j, k, 8, 4000, 11)
        assert rep.passed, (rep.name, rep.diff, rep.stderr)

    def test_report_serializes(self):
        spec = lattice.make_model("ig", 2, 1)
        rep = cumulants.ibp_moment_identity_check(spec, 4, 4, 1, 1, 4, 200, 0)
        data = rep.to_json()
        assert '"lhs"' in data and '"stderr"' in data


class TestIBPQuadrature:
    @pytest.mark.parametrize("family,a", [
        (mellin.exp_decay(1.0), 1.5),
        (mellin.exp_decay_inv(1.0), -1.5),
        (mellin.beta_kernel(2.0), 1.5),
        (mellin.beta_inv_kernel(2.0), -1.5),
        (mellin.beta_prime_kernel(2.0), -0.8),
    ], ids=lambda v: v.label() if hasattr(v, "label") else str(v))
    @pytest.mark.parametrize("n", [1, 2])
    def test_derivative_identity(self, family, a, n):
        assert cumulants.ibp_quadrature_check(family, a, n) <= 1e-6
