import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multising import gibbs
from multising.errors import PreconditionError
from multising.gibbs import CylinderSpec, SampleBatch
from multising.ising1d import ModelParams

import oracles

P_UNIT = ModelParams(1.0, 1.0, 0.0)
P_FREE = ModelParams(0.0, 1.0, 0.0)

params_st = st.builds(
    ModelParams, beta=st.floats(-1.5, 1.5), J=st.floats(-1.5, 1.5), h=st.floats(-1.5, 1.5)
)


class TestCylinders:
    def test_single_site(self):
        assert gibbs.cylinder_logprob_sigma({1: 1}, P_UNIT) == pytest.approx(
            math.log(0.5), abs=1e-14
        )

    def test_same_layer_pair(self):
        lp = gibbs.cylinder_logprob_sigma({1: 1, 2: 1}, P_UNIT)
        assert lp == pytest.approx(math.log(0.5 * 0.8807970779778823), abs=1e-9)

    def test_cross_layer_independence(self):
        # sites 3 and 4 lie on different layers: independent, and uniform at h=0
        lp = gibbs.cylinder_logprob_sigma({3: 1, 4: 1}, P_UNIT)
        assert lp == pytest.approx(math.log(0.25), abs=1e-13)
        assert lp != gibbs.cylinder_logprob_sigma({1: 1, 2: 1}, P_UNIT)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CylinderSpec.of({})
        with pytest.raises(ValueError):
            CylinderSpec.of({0: 1})
        with pytest.raises(ValueError):
            CylinderSpec.of({1: 2})

    @settings(max_examples=100, deadline=None)
    @given(
        params_st,
        st.dictionaries(st.integers(1, 64), st.sampled_from((-1, 1)), min_size=1, max_size=4),
        st.integers(1, 64),
    )
    def test_marginalization_consistency(self, params, assignments, extra_site):
        if extra_site in assignments:
            return
        base = gibbs.cylinder_logprob_sigma(assignments, params)
        total = 0.0
        for spin in (1, -1):
            ext = dict(assignments)
            ext[extra_site] = spin
            total += math.exp(gibbs.cylinder_logprob_sigma(ext, params))
        assert total == pytest.approx(math.exp(base), abs=1e-12)


class TestFreeEnergy:
    def test_infinite_temperature(self):
        assert gibbs.free_energy("free", ModelParams(0.0, 1.0, 0.0), 1e-11) == pytest.approx(
            2 * math.log(2), abs=1e-10
        )

    def test_boundary_dependence(self):
        fp = gibbs.free_energy("plus", P_UNIT)
        ff = gibbs.free_energy("free", P_UNIT)
        fm = gibbs.free_energy("minus", P_UNIT)
        assert fp > ff
        assert fp == fm

    def test_zero_field_closed_form(self):
        # at h=0 every finite volume already attains the limit:
        # f = 2 log 2 + log cosh(beta J)
        for bj in (0.3, 1.0, 2.0):
            f = gibbs.free_energy("free", ModelParams(1.0, bj, 0.0), 1e-12)
            assert f == pytest.approx(2 * math.log(2) + math.log(math.cosh(bj)), abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(params_st, st.sampled_from(["free", "plus", "minus"]), st.integers(1, 3))
    def test_layer_factorization_matches_hamiltonian(self, params, bc, n):
        # exhaustive check of the bond bookkeeping: chains of psi2+1 bonds
        # plus isolated odd sites in (n, 2n], boundary-tilted for +-
        a = gibbs.finite_volume_log_partition(n, params, bc)
        b = oracles.multiplicative_log_partition(n, params, bc)
        assert a == pytest.approx(b, abs=1e-11)

    def test_series_converges_to_finite_volume(self):
        params = ModelParams(0.7, 1.2, 0.4)
        f_lim = gibbs.free_energy("free", params, 1e-12)
        prev = None
        for k in range(4, 11):
            n = 1 << k
            d = abs(gibbs.finite_volume_log_partition(n, params, "free") / n - f_lim)
            if prev is not None:
                assert d <= prev
            prev = d
        assert prev <= 1e-7


class TestKsEntropy:
    def test_product_measure_gives_log2(self):
        p = ModelParams(1.0, 0.0, 0.0)
        assert gibbs.ks_entropy(p, "closed_h0") == math.log(2)
        assert gibbs.ks_entropy(p, "formula") == pytest.approx(math.log(2), abs=1e-14)
        assert gibbs.ks_entropy(p, "series", 1e-12) == pytest.approx(math.log(2), abs=1e-10)

    def test_mode_agreement_on_grid(self):
        for bj in (0.0, 0.5, 1.5, 3.0):
            p = ModelParams(1.0, bj, 0.0)
            c = gibbs.ks_entropy(p, "closed_h0")
            assert gibbs.ks_entropy(p, "series", 1e-11) == pytest.approx(c, abs=1e-10)
            assert gibbs.ks_entropy(p, "formula") == pytest.approx(c, abs=1e-12)

    def test_frozen_layer_limit(self):
        assert gibbs.ks_entropy(ModelParams(20.0, 1.0, 0.0), "closed_h0") == pytest.approx(
            0.5 * math.log(2), abs=1e-6
        )

    def test_closed_requires_zero_field(self):
        with pytest.raises(PreconditionError):
            gibbs.ks_entropy(ModelParams(1.0, 1.0, 0.1), "closed_h0")

    def test_formula_matches_series_off_symmetry(self):
        p = ModelParams(0.9, 1.3, 0.6)
        assert gibbs.ks_entropy(p, "formula") == pytest.approx(
            gibbs.ks_entropy(p, "series", 1e-12), abs=1e-10
        )

    def test_printed_variant_documented_mismatch(self):
        p = ModelParams(1.0, 0.0, 0.0)
        printed = gibbs.ks_entropy_printed_variant(p)
        assert printed == pytest.approx(7 * math.log(2) / 6, abs=1e-12)
        assert abs(printed - math.log(2)) > 0.1

    def test_report_keys(self):
        rep = gibbs.ks_entropy_report(P_UNIT, 1e-11)
        assert {"series", "formula", "printed_variant", "closed_h0"} <= set(rep)
        assert abs(rep["formula_minus_series"]) <= 1e-10
        rep_h = gibbs.ks_entropy_report(ModelParams(1.0, 1.0, 0.4), 1e-11)
        assert "closed_h0" not in rep_h


class TestSampler:
    def test_single_site_law(self):
        p = ModelParams(1.0, 1.0, 0.8)
        batch = gibbs.sample(1, p, 100_000, 7)
        from multising.ising1d import transfer

        target = transfer(p).pi[0]
        emp = float(np.mean(batch.configurations[:, 0] == 1))
        se = math.sqrt(target * (1 - target) / batch.count)
        assert abs(emp - target) <= 4 * se

    def test_single_marginal_stationarity(self):
        batch = gibbs.sample(12, P_UNIT, 40_000, 11)
        means = batch.configurations.mean(axis=0)
        assert np.max(np.abs(means)) <= 4.0 / math.sqrt(batch.count)

    def test_cylinder_frequencies_match_exact_law(self):
        count = 100_000
        batch = gibbs.sample(6, P_UNIT, count, 13)
        cfg = batch.configurations
        lps = gibbs.joint_law_logprobs(range(1, 7), P_UNIT)
        bits = (cfg == -1).astype(np.int64)
        codes = (bits * (1 << np.arange(6))[None, :]).sum(axis=1)
        freq = np.bincount(codes, minlength=64) / count
        for pattern in range(64):
            p_exact = math.exp(lps[pattern])
            se = math.sqrt(p_exact * (1 - p_exact) / count)
            assert abs(freq[pattern] - p_exact) <= 4 * se + 1e-12

    def test_reproducible_and_seed_sensitive(self):
        a = gibbs.sample(16, P_UNIT, 500, 42)
        b = gibbs.sample(16, P_UNIT, 500, 42)
        c = gibbs.sample(16, P_UNIT, 500, 43)
        assert np.array_equal(a.configurations, b.configurations)
        assert not np.array_equal(a.configurations, c.configurations)

    def test_replica_prefix_stability(self):
        small = gibbs.sample(16, P_UNIT, 100, 42)
        large = gibbs.sample(16, P_UNIT, 250, 42)
        assert np.array_equal(small.configurations, large.configurations[:100])

    def test_binary_round_trip(self, tmp_path):
        batch = gibbs.sample(10, ModelParams(0.8, 1.1, -0.2), 37, 99)
        path = tmp_path / "batch.bin"
        batch.save_binary(path)
        back = SampleBatch.load_binary(path)
        assert back.N == batch.N and back.count == batch.count and back.seed == batch.seed
        assert back.params == batch.params
        assert np.array_equal(back.configurations, batch.configurations)
        assert path.stat().st_size == 48 + 10 * 37

    def test_csv_export(self, tmp_path):
        batch = gibbs.sample(4, P_UNIT, 3, 5)
        path = tmp_path / "batch.csv"
        batch.save_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "site_1,site_2,site_3,site_4"
        assert len(lines) == 4
        assert set(lines[1].split(",")) <= {"1", "-1"}


class TestSmb:
    def test_infinite_temperature_exact(self):
        mean, se = gibbs.smb_estimate(1024, ModelParams(0.0, 1.0, 0.0), 400, 3)
        assert mean == pytest.approx(math.log(2), abs=1e-13)
        assert se <= 1e-15

    def test_product_measure_exact(self):
        mean, se = gibbs.smb_estimate(512, ModelParams(1.0, 0.0, 0.0), 200, 4)
        assert mean == pytest.approx(math.log(2), abs=1e-13)
        assert se <= 1e-15

    def test_converges_to_entropy(self):
        mean, se = gibbs.smb_estimate(1 << 10, P_UNIT, 800, 12345)
        target = gibbs.ks_entropy(P_UNIT, "closed_h0")
        assert abs(mean - target) <= 4 * se


class TestMultInvariance:
    def test_adjacent_pair_any_multiplier(self):
        rep = gibbs.check_mult_invariance([1, 2], 3, P_UNIT)
        assert rep.max_abs_diff_prob <= 1e-12
        assert rep.invariant

    def test_triple(self):
        rep = gibbs.check_mult_invariance([1, 2, 3], 5, P_UNIT)
        assert rep.max_abs_diff_prob <= 1e-12

    def test_field_breaks_invariance(self):
        rep = gibbs.check_mult_invariance([1, 2], 4, ModelParams(1.0, 1.0, 0.5))
        assert rep.max_abs_diff_prob > 1e-4
        assert not rep.invariant

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            gibbs.check_mult_invariance([], 2, P_UNIT)
        with pytest.raises(ValueError):
            gibbs.check_mult_invariance([1], 0, P_UNIT)
