import math

import numpy as np
import pytest

from multising import arith, ldp, multiprime
from multising.acceptance import brute_region_pressure
from multising.arith import PrimeBasis, Region
from multising.errors import InfeasibleSizeError, PreconditionError
from multising.ising1d import ModelParams, tilted_layer_pressure
from multising.multiprime import RegionPressureKey
from multising.observables import Observable, to_first_layer

P_FREE = ModelParams(0.0, 1.0, 0.0)
P_UNIT = ModelParams(1.0, 1.0, 0.0)
F_BOND = Observable.make([((1, 2), 1.0)])
F_TWO = Observable.make([((1, 2), 1.0), ((1, 3), 1.0)])


class TestExtendObservable:
    def test_two_prime_example(self):
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_UNIT)
        assert model.basis.primes == (2, 3)
        assert model.base_axis == 0
        assert fstar.terms == (
            (frozenset({(0, 0), (0, 1)}), 1.0),
            (frozenset({(0, 0), (1, 0)}), 1.0),
        )

    def test_identity_observable(self):
        model, fstar = multiprime.extend_observable(
            Observable.make([((1,), 1.0)]), PrimeBasis((2,)), P_UNIT
        )
        assert model.basis.primes == (2,)
        assert fstar.terms == ((frozenset({(0,)}), 1.0),)

    def test_prime_five(self):
        model, fstar = multiprime.extend_observable(
            Observable.make([((1, 5), 1.0)]), PrimeBasis((2,)), P_UNIT
        )
        assert model.basis.primes == (2, 5)
        assert fstar.terms == ((frozenset({(0, 0), (0, 1)}), 1.0),)

    def test_rejects_multi_prime_base(self):
        with pytest.raises(PreconditionError):
            multiprime.extend_observable(F_BOND, PrimeBasis((2, 3)), P_UNIT)


class TestRegionPressure:
    def test_zero_tilt(self):
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_UNIT)
        region = arith.canonical_region(model.basis, 4)
        v = multiprime.region_pressure(RegionPressureKey(region, fstar, 0.0), model)
        assert abs(v) <= 1e-12

    def test_single_point_two_bonds(self):
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_FREE)
        region = Region(frozenset({(0, 0)}))
        for t in (-0.9, 0.4, 1.3):
            v = multiprime.region_pressure(RegionPressureKey(region, fstar, t), model)
            assert v == pytest.approx(2 * math.log(math.cosh(t)), abs=1e-12)

    @pytest.mark.parametrize("k", range(9))
    def test_one_dimensional_reduction(self, k):
        model, fstar = multiprime.extend_observable(F_BOND, PrimeBasis((2,)), P_UNIT)
        region = Region(frozenset((i,) for i in range(k + 1)))
        a = multiprime.region_pressure(RegionPressureKey(region, fstar, 0.9), model)
        b = tilted_layer_pressure(k, to_first_layer(F_BOND), 0.9, P_UNIT)
        assert a == pytest.approx(b, abs=1e-11)

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(5)
        params = ModelParams(0.6, 1.1, -0.4)
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), params)
        for _ in range(8):
            pts = {(0, 0), (1, 0), (0, 1)}
            if rng.random() < 0.5:
                pts.add((1, 1))
            t = float(rng.uniform(-1, 1))
            a = multiprime.region_pressure(RegionPressureKey(Region(frozenset(pts)), fstar, t), model)
            b = brute_region_pressure(pts, fstar, t, model)
            assert a == pytest.approx(b, abs=1e-11)

    def test_dependence_cap(self):
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_UNIT)
        region = arith.canonical_region(model.basis, 30)
        with pytest.raises(InfeasibleSizeError, match="cap"):
            multiprime.region_pressure(RegionPressureKey(region, fstar, 0.5), model)

    def test_constant_term_shift(self):
        f = Observable.make([((1, 2), 1.0), ((), 0.5)])
        model, fstar = multiprime.extend_observable(f, PrimeBasis((2,)), P_FREE)
        region = Region(frozenset({(0,), (1,)}))
        with_const = multiprime.region_pressure(RegionPressureKey(region, fstar, 0.8), model)
        f0 = Observable.make([((1, 2), 1.0)])
        _, fstar0 = multiprime.extend_observable(f0, PrimeBasis((2,)), P_FREE)
        without = multiprime.region_pressure(RegionPressureKey(region, fstar0, 0.8), model)
        assert with_const == pytest.approx(without + 0.8 * 0.5 * 2, abs=1e-12)


class TestKiePressure:
    def test_zero_tilt(self):
        v, rows = multiprime.kie_pressure(F_TWO, P_UNIT, 0.0, 1e-6)
        assert abs(v) <= 1e-12
        assert rows[0].j == 1

    @pytest.mark.parametrize("params", [P_FREE, P_UNIT])
    def test_one_dimensional_reduction(self, params):
        tol = 1e-4
        fstar = to_first_layer(F_BOND)
        for t in (-2.0, -0.5, 1.0, 2.0):
            v, _ = multiprime.kie_pressure(F_BOND, params, t, tol)
            w, _ = ldp.scgf(fstar, params, t, 1e-11)
            assert abs(v - w) <= 2 * tol

    def test_two_prime_agrees_with_finite_volume(self):
        # largest cap-feasible truncation; the finite-volume computation is
        # the authoritative value to compare against
        v, rows = multiprime.kie_pressure(F_TWO, P_FREE, 0.1, tol=0.03)
        w = multiprime.finite_pressure_exact_d(F_TWO, 0.1, 48, P_FREE)
        assert abs(v - w) <= 1e-2
        assert rows[-1].tail_bound < 0.03
        tails = [r.tail_bound for r in rows]
        assert all(b <= a + 1e-12 for a, b in zip(tails, tails[1:]))

    def test_series_table_fields(self):
        _, rows = multiprime.kie_pressure(F_BOND, P_UNIT, 0.7, 1e-3)
        assert [r.j for r in rows] == list(range(1, len(rows) + 1))
        assert all(r.w_j > 0 for r in rows)
        smooth = arith.smooth_numbers(PrimeBasis((2,)), len(rows))
        assert [r.n_j for r in rows] == smooth

    def test_unreachable_tolerance_raises_cap_error(self):
        with pytest.raises(InfeasibleSizeError, match="cap"):
            multiprime.kie_pressure(F_TWO, P_UNIT, 1.0, 1e-10)


class TestFiniteVolume:
    def test_single_site(self):
        v = multiprime.finite_pressure_exact_d(F_TWO, 0.7, 1, P_FREE)
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_FREE)
        w = multiprime.region_pressure(
            RegionPressureKey(Region(frozenset({(0, 0)})), fstar, 0.7), model
        )
        assert v == pytest.approx(w, abs=1e-12)

    def test_zero_tilt(self):
        assert abs(multiprime.finite_pressure_exact_d(F_TWO, 0.0, 12, P_UNIT)) <= 1e-12

    def test_hand_checkable_two_layer_volume(self):
        # volume 6 over primes {2,3}: layer 1 carries {1,2,3,4,6} and layer 5
        # a single point
        model, fstar = multiprime.extend_observable(F_TWO, PrimeBasis((2,)), P_FREE)
        part = arith.layer_partition(6, model.basis)
        assert set(part) == {1, 5}
        t = 0.35
        direct = sum(
            brute_region_pressure(reg.points, fstar, t, model) for reg in part.values()
        ) / 6
        v = multiprime.finite_pressure_exact_d(F_TWO, t, 6, P_FREE)
        assert v == pytest.approx(direct, abs=1e-11)

    def test_d1_matches_layer_route(self):
        fstar = to_first_layer(F_BOND)
        for n in (5, 16, 37):
            a = multiprime.finite_pressure_exact_d(F_BOND, 0.8, n, P_UNIT)
            b = ldp.finite_pressure_exact(fstar, 0.8, n, P_UNIT)
            assert a == pytest.approx(b, abs=1e-11)


class TestShapeScan:
    def test_equal_cardinality_regions_coincide(self):
        shapes = multiprime.layer_region_shapes(PrimeBasis((2, 3)), 100, 6)
        assert set(shapes) == {1, 2, 3, 4, 5, 6}
        for c, shape_set in shapes.items():
            assert len(shape_set) == 1
            region = Region(next(iter(shape_set)))
            assert region.cardinality == c
            assert region.is_lower_set()
            assert region.points == arith.canonical_region(PrimeBasis((2, 3)), c).points
