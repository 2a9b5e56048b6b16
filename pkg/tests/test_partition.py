import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpolymer import lattice, mellin, partition
from dpolymer.errors import CapabilityError, LatticeValidationError

ALL_MODELS = [("ig", 2.0, 1.0), ("g", 1.0, 0.5), ("b", 1.0, 0.5), ("ib", 2.0, 1.0)]
MODEL_IDS = [m[0] for m in ALL_MODELS]


def spec_of(kind):
    for k, mu, th in ALL_MODELS:
        if k == kind:
            return lattice.make_model(k, mu, th)
    raise KeyError(kind)


class TestForwardDP:
    def test_single_row(self):
        env = lattice.sample_environment(spec_of("ig"), 1, 0, 0)
        table = partition.log_partition(env)
        assert table.logz[1, 0] == pytest.approx(env.south[0], abs=1e-15)

    def test_two_paths(self):
        env = lattice.sample_environment(spec_of("g"), 1, 1, 1)
        table = partition.log_partition(env)
        expected = np.logaddexp(
            env.south[0] + env.logy2[0, 0], env.west[0] + env.logy1[0, 0]
        )
        assert table.logz[1, 1] == pytest.approx(expected, abs=1e-13)

    def test_path_count(self):
        assert sum(1 for _ in partition._iter_paths(2, 2)) == 6

    @pytest.mark.parametrize("kind,mu,th", ALL_MODELS, ids=MODEL_IDS)
    def test_dp_matches_enumeration(self, kind, mu, th):
        spec = lattice.make_model(kind, mu, th)
        for seed in range(10):
            env = lattice.sample_environment(spec, 4, 4, seed)
            table = partition.log_partition(env)
            assert float(table.corner()) == pytest.approx(
                partition.brute_force_logZ(env), abs=1e-9
            )

    def test_boundary_only_path(self):
        env = lattice.sample_environment(spec_of("ig"), 5, 0, 3)
        assert partition.brute_force_logZ(env) == pytest.approx(env.south.sum(), abs=1e-12)

    def test_brute_force_capability(self):
        env = lattice.sample_environment(spec_of("ig"), 8, 8, 0)
        with pytest.raises(CapabilityError):
            partition.brute_force_logZ(env)

    @given(m=st.integers(1, 5), n=st.integers(1, 5), seed=st.integers(0, 10 ** 6))
    @settings(max_examples=25, deadline=None)
    def test_dp_enumeration_hypothesis(self, m, n, seed):
        env = lattice.sample_environment(spec_of("b"), m, n, seed)
        table = partition.log_partition(env)
        assert float(table.corner()) == pytest.approx(partition.brute_force_logZ(env), abs=1e-9)


class TestNSEW:
    def test_degenerate_row(self):
        env = lattice.sample_environment(spec_of("ig"), 4, 0, 1)
        d = partition.nsew_decompose(env, partition.log_partition(env))
        assert d.w == 0.0 and d.e == 0.0
        assert d.n == pytest.approx(d.s, abs=1e-12)

    @pytest.mark.parametrize("kind,mu,th", ALL_MODELS, ids=MODEL_IDS)
    def test_identity_on_8x8(self, kind, mu, th):
        spec = lattice.make_model(kind, mu, th)
        for seed in range(5):
            env = lattice.sample_environment(spec, 8, 8, seed)
            table = partition.log_partition(env)
            d = partition.nsew_decompose(env, table)
            assert abs(d.west_north - d.south_east) <= 1e-9
            assert abs(d.west_north - float(table.corner())) <= 1e-9

    def test_identity_on_16x16_ig(self):
        env = lattice.sample_environment(spec_of("ig"), 16, 16, 7)
        table = partition.log_partition(env)
        d = partition.nsew_decompose(env, table)
        assert d.west_north == pytest.approx(float(table.corner()), abs=1e-9)

    def test_south_sum_is_boundary(self):
        env = lattice.sample_environment(spec_of("ib"), 6, 6, 2)
        d = partition.nsew_decompose(env, partition.log_partition(env))
        assert d.s == pytest.approx(env.south.sum(), abs=1e-12)
        assert d.w == pytest.approx(env.west.sum(), abs=1e-12)


class TestDownRight:
    def test_antidiagonal_edge_count(self):
        path = partition.staircase_path(32, 32)
        assert len(path) - 1 == 64
        env = lattice.sample_environment(spec_of("ig"), 32, 32, 4)
        table = partition.log_partition(env)
        labels, values = partition.down_right_collect(env, table, path)
        assert len(labels) == 64 and np.all(np.isfinite(values))

    def test_boundary_path_returns_raw_weights(self):
        env = lattice.sample_environment(spec_of("g"), 5, 4, 8)
        table = partition.log_partition(env)
        path = partition.staircase_path(5, 4, "boundary")
        labels, values = partition.down_right_collect(env, table, path)
        np.testing.assert_allclose(values[: 4], env.west[::-1], atol=1e-12)
        np.testing.assert_allclose(values[4:], env.south, atol=1e-12)
        assert labels[:4] == ["R2"] * 4 and labels[4:] == ["R1"] * 5

    def test_malformed_path_rejected(self):
        env = lattice.sample_environment(spec_of("ig"), 4, 4, 0)
        table = partition.log_partition(env)
        with pytest.raises(LatticeValidationError):
            partition.down_right_collect(env, table, [(0, 4), (0, 3), (1, 3), (0, 3)])
        with pytest.raises(LatticeValidationError):
            partition.down_right_collect(env, table, [(0, 5), (1, 5)])

    def test_stationarity_of_south_variance(self):
        # Var(log Z_{m,0}) = m * psi_1(a1)
        spec = spec_of("ig")
        batch = lattice.sample_environment_batch(spec, 16, 0, 99, 4000, r_max=0)
        s = batch.south.sum(axis=1)
        var = s.var(ddof=1)
        se = math.sqrt(2.0 / (s.size - 1)) * var
        assert abs(var - 16 * mellin.psi(spec.f1, 1, spec.a1)) <= 4 * se

    @pytest.mark.parametrize("path_kind", ["antidiagonal", "mid"])
    @pytest.mark.parametrize("kind,mu,th", ALL_MODELS, ids=MODEL_IDS)
    def test_burke_two_staircases_all_models(self, kind, mu, th, path_kind):
        spec = lattice.make_model(kind, mu, th)
        seed = 5 + MODEL_IDS.index(kind)
        rep = partition.burke_test(spec, 16, 16, 1000, seed, path_kind=path_kind)
        assert rep.passes(0.95), (rep.ks_pass_fraction, rep.corr_pass_fraction)


class TestTableDump:
    def test_csv_roundtrip(self, tmp_path):
        env = lattice.sample_environment(spec_of("b"), 3, 2, 0)
        table = partition.log_partition(env)
        path = tmp_path / "table.csv"
        partition.dump_table_csv(table, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "i,j,logZ"
        assert len(rows) == 1 + 4 * 3
        i, j, v = rows[-1].split(",")
        assert float(v) == table.logz[int(i), int(j)]
