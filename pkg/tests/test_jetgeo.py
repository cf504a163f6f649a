from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracjet.errors import DomainError
from fracjet.fracpoly import FracPoly
from fracjet.jetgeo import (
    CoordinateChange,
    JetPoint,
    TangentRep,
    apply_structures,
    cartan_coeffs,
    check_fvf,
    interior_product_residual,
    pairing_table,
    random_points,
    report,
    transform_jet,
    vertical_basis,
)
from fracjet.models import SamuelsonParams
from fracjet.specfun import FracOrder, as_order
from fracjet.variational import LagrangianSpec

pos = st.floats(0.1, 3.0)


def quadratic(alpha, a1=0.5, a2=1.0, a3=0.5):
    P = SamuelsonParams(a1, a2, a3, 0.0, alpha)
    return LagrangianSpec(P.lagrangian(), as_order(alpha, allow_classical=True))


@pytest.mark.parametrize("al", [0.3, 0.5, 0.9])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_pairing_identity(al, n):
    np.testing.assert_allclose(pairing_table(al, n), np.eye(2 * n + 1), atol=1e-12)


class TestFVFCheck:
    @settings(max_examples=40)
    @given(pos, pos, pos, st.floats(-5, 5))
    def test_accepts_contact_vectors(self, t, x, y, m):
        p = JetPoint(t, (x,), (y,))
        chk = check_fvf(TangentRep(1.0, (y,), (m,)), p, 0.5)
        assert chk.is_fvf and np.all(chk.defects == 0)

    def test_rejects_missing_time(self):
        p = JetPoint(0.5, (1.0,), (2.0,))
        chk = check_fvf(TangentRep(0.0, (2.0,), (0.0,)), p, 0.5)
        assert not chk.is_fvf and chk.defects[0] == -1.0

    @pytest.mark.parametrize("delta", [1e-3, 0.5, -2.0])
    def test_defect_proportional(self, delta):
        p = JetPoint(0.5, (1.0, 1.0), (2.0, 3.0))
        chk = check_fvf(TangentRep(1.0, (2.0 + delta, 3.0), (0.0, 0.0)), p, 0.7)
        assert not chk.is_fvf and chk.defects[1] == pytest.approx(delta)


class TestStructures:
    def test_vertical_killed_by_s(self):
        p = JetPoint(1.0, (1.0,), (2.0,))
        _, _, S = apply_structures(vertical_basis(1, 0), p, 0.5)
        assert np.all(S.as_array() == 0)

    def test_theta1_of_time_unit(self):
        p = JetPoint(1.0, (1.0, 2.0), (0.5, 3.0))
        th1, _, _ = apply_structures(TangentRep(1.0, (0.0, 0.0), (0.0, 0.0)), p, 0.4)
        g = math.gamma(1.4)
        np.testing.assert_allclose(th1.as_array(), g * np.array([1.0, 0.5, 3.0, 0.0, 0.0]), rtol=1e-15)

    def test_theta2_of_fvf(self):
        p = JetPoint(1.0, (1.0,), (2.0,))
        _, th2, _ = apply_structures(TangentRep(1.0, (2.0,), (7.0,)), p, 0.5)
        assert np.all(th2.as_array() == 0)


class TestCartan:
    def test_constant_lagrangian(self):
        L = LagrangianSpec(FracPoly.const(4.0), FracOrder(0.5))
        om = cartan_coeffs(L, JetPoint(1.0, (1.0,), (1.0,)))
        for arr in (om.A, om.B, om.A2, om.B2):
            assert np.all(arr == 0)
        assert interior_product_residual(L, JetPoint(1.0, (1.0,), (1.0,))) == 0.0

    @pytest.mark.parametrize("a1", [0.5, 1.3])
    def test_velocity_block_at_half(self, a1):
        om = cartan_coeffs(quadratic(0.5, a1=a1), JetPoint(1.0, (1.0,), (1.0,)))
        assert om.B2[0, 0] == pytest.approx(a1, rel=1e-14)

    def test_time_independent_lagrangian(self):
        # no t in L: A reduces to the x-part only
        L = quadratic(0.5)
        p = JetPoint(2.0, (1.0,), (1.0,))
        q = JetPoint(7.0, (1.0,), (1.0,))
        np.testing.assert_array_equal(cartan_coeffs(L, p).A, cartan_coeffs(L, q).A)

    def test_unknown_variant(self):
        with pytest.raises(DomainError):
            cartan_coeffs(quadratic(0.5), JetPoint(1.0, (1.0,), (1.0,)), "other")


class TestInteriorProduct:
    def test_classical_annihilation(self):
        L = quadratic(1.0, 0.5, 0.2, 0.5)
        res = [interior_product_residual(L, p) for p in random_points(1, 50, 5)]
        assert max(res) <= 1e-10

    def test_perturbation_detected(self):
        L = quadratic(1.0, 0.5, 0.2, 0.5)
        p = random_points(1, 1, 9)[0]
        assert interior_product_residual(L, p, perturbation=1e-2) > 1e-4


class TestTransform:
    def test_identity(self):
        p = JetPoint(0.3, (1.5, 0.2), (0.7, -1.0))
        out = transform_jet(CoordinateChange.identity(2), p, 0.5)
        np.testing.assert_allclose(out.x, p.x, rtol=1e-15)
        np.testing.assert_allclose(out.y, p.y, rtol=1e-15)

    def test_scaling_at_half(self):
        p = JetPoint(0.0, (1.0,), (1.0,))
        out = transform_jet(CoordinateChange((2.0,), (0,)), p, 0.5)
        assert out.x[0] == 2.0 and out.y[0] == pytest.approx(2.0**-0.5, rel=1e-14)

    def test_permutation(self):
        p = JetPoint(0.0, (1.0, 2.0, 3.0), (4.0, 5.0, 6.0))
        out = transform_jet(CoordinateChange((1.0, 1.0, 1.0), (2, 0, 1)), p, 0.3)
        assert out.x == (3.0, 1.0, 2.0)
        np.testing.assert_allclose(out.y, (6.0, 4.0, 5.0), rtol=1e-14)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(0.2, 5.0), min_size=3, max_size=3),
        st.permutations([0, 1, 2]),
        st.lists(pos, min_size=3, max_size=3),
        st.lists(st.floats(-3, 3), min_size=3, max_size=3),
        st.floats(0.1, 0.95),
    )
    def test_roundtrip(self, scale, perm, x, y, al):
        change = CoordinateChange(tuple(scale), tuple(perm))
        p = JetPoint(0.0, tuple(x), tuple(y))
        back = transform_jet(change.inverse(), transform_jet(change, p, al), al)
        np.testing.assert_allclose(back.x, p.x, rtol=1e-12)
        np.testing.assert_allclose(back.y, p.y, rtol=1e-12, atol=1e-12)

    def test_rejects_bad_changes(self):
        with pytest.raises(DomainError):
            CoordinateChange((1.0, 1.0), (0, 0))
        with pytest.raises(DomainError):
            CoordinateChange((-1.0,), (0,))


def test_random_points_seeded():
    a, b = random_points(2, 5, 42), random_points(2, 5, 42)
    assert a == b and all(0.1 <= v <= 2.0 for p in a for v in (p.t, *p.x, *p.y))


def test_report_shape():
    r = report("c", [1e-12, 3e-11], 1e-10)
    assert r == {"check": "c", "points": 2, "max_residual": 3e-11, "mean_residual": pytest.approx(1.55e-11), "pass": True}
