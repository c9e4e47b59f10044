import math

import numpy as np
import pytest

from multising import gibbs, ldp
from multising.ising1d import ModelParams
from multising.observables import Observable, to_first_layer

F_BOND = Observable.make([((1, 2), 1.0)])
F_MAG = Observable.make([((1,), 1.0)])
FS_BOND = to_first_layer(F_BOND)
FS_MAG = to_first_layer(F_MAG)
P_FREE = ModelParams(0.0, 1.0, 0.0)
P_UNIT = ModelParams(1.0, 1.0, 0.0)


def logcosh_conjugate(x):
    return ((1 + x) / 2) * math.log(1 + x) + ((1 - x) / 2) * math.log(1 - x)


class TestScgf:
    def test_zero_tilt(self):
        for fstar in (FS_BOND, FS_MAG):
            v, err = ldp.scgf(fstar, P_UNIT, 0.0, 1e-10)
            assert abs(v) <= 1e-12
            assert err == 0.0

    def test_infinite_temperature_closed_forms(self):
        for fstar in (FS_BOND, FS_MAG):
            for t in (-2.5, -0.3, 0.7, 3.0):
                v, err = ldp.scgf(fstar, P_FREE, t, 1e-10)
                assert v == pytest.approx(math.log(math.cosh(t)), abs=1e-8)
                assert err < 1e-10

    def test_zero_field_bond_closed_form(self):
        # bond variables are iid signs with P(+) = alpha at h=0
        alpha = 1 / (1 + math.exp(-2))
        for t in (-1.5, 0.4, 2.0):
            v, _ = ldp.scgf(FS_BOND, P_UNIT, t, 1e-12)
            target = math.log(alpha * math.exp(t) + (1 - alpha) * math.exp(-t))
            assert v == pytest.approx(target, abs=1e-11)

    def test_truncation_bound_is_honest(self):
        v9, err9 = ldp.scgf(FS_BOND, P_UNIT, 1.3, 1e-6)
        v12, _ = ldp.scgf(FS_BOND, P_UNIT, 1.3, 1e-13)
        assert abs(v9 - v12) <= err9

    def test_route_equivalence(self):
        for bj in (0.0, 0.5, 1.0, 2.0):
            params = ModelParams(1.0, bj, 0.0)
            for t in np.arange(-3.0, 3.01, 0.5):
                a, _ = ldp.scgf(FS_BOND, params, float(t), 1e-9)
                b = ldp.scgf_via_free_energy(float(t), params, 1e-9)
                assert abs(a - b) <= 2e-9

    def test_free_energy_route_closed_form(self):
        for t in (-2.0, 0.3, 1.1):
            assert ldp.scgf_via_free_energy(t, P_FREE, 1e-10) == pytest.approx(
                math.log(math.cosh(t)), abs=1e-8
            )
        assert ldp.scgf_via_free_energy(0.0, P_UNIT, 1e-10) == 0.0


class TestScgfCurve:
    def test_invariants_and_supporting_line(self):
        curve = ldp.scgf_curve(FS_BOND, P_UNIT, np.arange(-2.0, 2.001, 0.1), 1e-11)
        curve.validate()
        i0 = int(np.argmin(np.abs(curve.grid)))
        assert abs(curve.F[i0]) <= 1e-12
        slope0 = curve.Fprime[i0]
        assert np.all(curve.F >= curve.grid * slope0 - 1e-9)

    def test_csv_schema(self):
        curve = ldp.scgf_curve(FS_BOND, P_UNIT, np.arange(-0.5, 0.51, 0.25), 1e-10)
        assert curve.csv_header() == ["t", "F", "Fprime", "trunc_err"]
        rows = list(curve.csv_rows())
        assert len(rows) == curve.grid.size and len(rows[0]) == 4

    def test_derivative_matches_secants_to_second_order(self):
        step = 0.1
        curve = ldp.scgf_curve(FS_BOND, P_UNIT, np.arange(-1.0, 1.001, step), 1e-12)
        secants = (curve.F[2:] - curve.F[:-2]) / (2 * step)
        # central secants agree with the tabulated derivative to O(step^2)
        assert np.max(np.abs(secants - curve.Fprime[1:-1])) <= step**2

    def test_depth_pinning_matches_blocked_evaluation(self):
        grid = np.arange(-1.0, 1.001, 0.125)
        depth = ldp.series_depth_for(FS_BOND, 1.0 + 1e-4, 1e-10)
        full, _ = ldp.scgf_values(FS_BOND, P_UNIT, grid, 1e-10, depth=depth)
        parts = [
            ldp.scgf_values(FS_BOND, P_UNIT, b, 1e-10, depth=depth)[0]
            for b in np.array_split(grid, 3)
        ]
        assert np.array_equal(full, np.concatenate(parts))


class TestLegendre:
    def F(self, t):
        return ldp.scgf(FS_BOND, P_FREE, t, 1e-12)[0]

    def test_rate_vanishes_at_mean(self):
        h = 1e-4
        x0 = (self.F(h) - self.F(-h)) / (2 * h)
        val, t_star = ldp.legendre(self.F, x0, slope_bound=1.0)
        assert val <= 1e-10
        assert abs(t_star) <= 1e-6

    def test_matches_analytic_conjugate(self):
        for x in (-0.8, -0.25, 0.1, 0.5, 0.9):
            val, t_star = ldp.legendre(self.F, x, slope_bound=1.0)
            assert val == pytest.approx(logcosh_conjugate(x), abs=1e-8)
            assert t_star == pytest.approx(math.atanh(x), abs=1e-5)

    def test_out_of_range_sentinel(self):
        for x in (1.5, -2.0, 1.0, -1.0):
            val, t_star = ldp.legendre(self.F, x, slope_bound=1.0)
            assert val == math.inf
            assert math.isnan(t_star)

    def test_conjugate_recovers_curve(self):
        h = 1e-4
        for t in np.arange(-2.0, 2.01, 0.25):
            x_star = (self.F(float(t) + h) - self.F(float(t) - h)) / (2 * h)
            val, _ = ldp.legendre(self.F, x_star, slope_bound=1.0)
            assert float(t) * x_star - val == pytest.approx(self.F(float(t)), abs=1e-6)

    def test_curve_input_path(self):
        curve = ldp.scgf_curve(FS_BOND, P_FREE, np.arange(-4.0, 4.001, 0.02), 1e-12)
        val, t_star = ldp.legendre(curve, 0.5)
        assert val == pytest.approx(logcosh_conjugate(0.5), abs=1e-4)
        assert ldp.legendre(curve, 0.9999)[0] == math.inf

    def test_non_convex_curve_rejected(self):
        bogus = ldp.ScgfCurve(
            grid=np.array([-1.0, 0.0, 1.0]),
            F=np.array([1.0, 0.0, 1.0]),
            Fprime=np.array([1.0, 0.0, -1.0]),
            trunc_err=np.zeros(3),
            deriv_step=1e-4,
        )
        with pytest.raises(ValueError):
            ldp.legendre(bogus, 0.3)

    def test_rate_curve_invariants(self):
        xs = np.linspace(-0.8, 0.8, 17)
        rc = ldp.rate_curve(FS_BOND, P_FREE, xs, 1e-11)
        assert np.all(rc.I >= 0.0)
        assert np.all(np.diff(rc.I, 2) >= -1e-9)
        assert np.all(np.diff(rc.t_star) > 0)
        assert rc.I[8] <= 1e-10  # x = 0 = F'(0) at beta = 0

    def test_rate_curve_flags_and_duality(self):
        xs = np.array([-1.5, -0.5, 0.0, 0.5, 1.5])
        rc = ldp.rate_curve(FS_BOND, P_FREE, xs, 1e-11)
        assert list(rc.domain_flag) == [1, 0, 0, 0, 1]
        assert rc.I[0] == math.inf and rc.I[-1] == math.inf
        assert np.all(rc.I[1:4] >= 0.0)
        assert rc.csv_header() == ["x", "I", "t_star", "domain_flag"]
        interior = rc.I[1:4]
        assert np.all(np.diff(rc.t_star[1:4]) > 0)
        assert interior[1] <= min(interior[0], interior[2])


class TestCltVariance:
    def test_infinite_temperature_unit_variance(self):
        assert ldp.clt_variance(FS_BOND, P_FREE) == pytest.approx(1.0, abs=1e-6)
        assert ldp.clt_variance(FS_MAG, P_FREE) == pytest.approx(1.0, abs=1e-6)

    def test_zero_field_bond_variance(self):
        # iid bonds: variance 1 - tanh(beta J)^2
        assert ldp.clt_variance(FS_BOND, P_UNIT) == pytest.approx(
            1 - math.tanh(1.0) ** 2, abs=1e-6
        )

    def test_nonnegative(self):
        for params in (P_UNIT, ModelParams(0.9, -1.2, 0.4)):
            assert ldp.clt_variance(FS_BOND, params) >= 0.0


class TestFinitePressure:
    def test_single_site_volume(self):
        for t in (-1.0, 0.6):
            assert ldp.finite_pressure_exact(FS_MAG, t, 1, P_FREE) == pytest.approx(
                math.log(math.cosh(t)), abs=1e-12
            )

    def test_infinite_temperature_exact_at_every_volume(self):
        for n in (2**8, 2**12, 2**16):
            v = ldp.finite_pressure_exact(FS_BOND, 1.0, n, P_FREE)
            assert v == pytest.approx(math.log(math.cosh(1.0)), abs=1e-13)

    def test_zero_tilt(self):
        assert abs(ldp.finite_pressure_exact(FS_BOND, 0.0, 4096, P_UNIT)) <= 1e-12

    def test_convergence_to_series(self):
        target, _ = ldp.scgf(FS_BOND, P_FREE, 1.0, 1e-12)
        prev = None
        for k in range(8, 17, 2):
            d = abs(ldp.finite_pressure_exact(FS_BOND, 1.0, 1 << k, P_FREE) - target)
            if prev is not None:
                assert d <= prev + 1e-12
            prev = d
        assert prev <= 5e-3

    def test_volume_cap(self):
        with pytest.raises(ValueError):
            ldp.finite_pressure_exact(FS_BOND, 0.5, (1 << 20) + 1, P_UNIT)


class TestMonteCarloHarness:
    def test_multiplicative_average_hand_check(self):
        batch = gibbs.sample(12, P_UNIT, 6, 21)
        f = Observable.make([((1, 2), 2.0), ((3,), -1.0)])
        x = ldp.multiplicative_average(batch, f, 4)
        cfg = batch.configurations
        for r in range(6):
            s = cfg[r]
            direct = sum(2.0 * s[i - 1] * s[2 * i - 1] - s[3 * i - 1] for i in range(1, 5))
            assert x[r] == pytest.approx(direct / 4, abs=1e-12)

    def test_average_requires_volume(self):
        batch = gibbs.sample(4, P_UNIT, 3, 1)
        with pytest.raises(ValueError):
            ldp.multiplicative_average(batch, F_BOND, 4)

    def test_constant_term(self):
        batch = gibbs.sample(4, P_UNIT, 3, 1)
        f = Observable.make([((), 2.5), ((1,), 0.0)])
        x = ldp.multiplicative_average(batch, f, 4)
        assert np.allclose(x, 2.5)

    def test_empirical_rates_respect_chernoff(self):
        # P(X_N >= x) <= exp(-N I(x)) exactly, so the empirical rate can only
        # undershoot I by sampling noise; the overshoot is the sqrt(N) tail
        # prefactor
        n, count = 256, 100_000
        rows = ldp.empirical_ldp_check(F_BOND, P_FREE, n, count, 77, [0.0, 0.118, 0.9])
        at_mean, mid, far = rows
        assert at_mean.emp_rate <= 2.0 / n
        assert not mid.censored and mid.n_tail > 100
        assert mid.emp_rate >= mid.rate - math.log(2) / n
        assert mid.emp_rate <= mid.rate + (0.5 * math.log(2 * math.pi * n) + 3.0) / n
        assert far.censored and far.emp_rate == math.inf and far.n_tail == 0

    def test_clt_mc_summary(self):
        s = ldp.clt_mc_summary(F_BOND, P_UNIT, 1 << 10, 4000, 2026)
        assert abs(s["emp_mean"] - s["fprime0"]) <= 4 * s["emp_se"]
        assert s["fprime0"] == pytest.approx(math.tanh(1.0), abs=1e-8)
        assert s["n_times_var"] == pytest.approx(s["sigma2"], rel=0.15)
