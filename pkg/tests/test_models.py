from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fracjet.errors import DomainError, IntegrationError
from fracjet.fdesolve import Trajectory
from fracjet.fracpoly import FracPoly, parse_poly
from fracjet.models import (
    InvestmentSpec,
    SamuelsonParams,
    check_homogeneity,
    find_steady_state,
    investment_derive,
    investment_relation_residual,
    investment_residuals,
    investment_simulate,
    liviatan_el_residual,
    liviatan_steady_state,
    samuelson_classical_solution,
    samuelson_derive,
    samuelson_residual,
    samuelson_simulate,
    unit_degree_exponent,
)
from fracjet.specfun import gamma_fn

# closed form of x'' - 0.3 x' - 1.06 x = 0, x(0)=1, x'(0)=0 at t=1 (60 digits, frozen)
SAMUELSON_X1 = 1.6420272178799478465

FIXTURE_L1 = "K^0.3 * I^0.4 * N^0.2"
FIXTURE_PHI = "-0.1*K + I + 0.2*N"


def fixture(alpha=0.5, rho=0.3, L1=FIXTURE_L1, r=None):
    return InvestmentSpec(parse_poly(L1, alpha), parse_poly(FIXTURE_PHI, alpha), rho, alpha, r)


class TestSamuelson:
    def test_closed_form_match_at_half(self):
        P = SamuelsonParams(0.5, 1.0, 0.5, 0.3, 0.5)
        sys = samuelson_derive(P)
        assert (sys.residuals[0] * gamma_fn(1.5)).allclose(P.reference_equation(), rtol=1e-12)

    def test_only_first_term_survives(self):
        al = 0.6
        R = samuelson_derive(SamuelsonParams(0.8, 0.0, 0.0, 0.0, al)).residuals[0] * gamma_fn(1 + al)
        expected = FracPoly.var("y2", 1, 0.8 * gamma_fn(1 + al) * gamma_fn(1 + 2 * al))
        assert R.allclose(expected, rtol=1e-12)

    @pytest.mark.parametrize("a, rho", [(0.2, 0.3), (1.0, 0.0), (-0.5, 1.2)])
    def test_classical_coefficients(self, a, rho):
        R = samuelson_derive(SamuelsonParams(0.5, a, 0.5, rho, 1.0)).residuals[0]
        c = R.coefficient({"y2": 1})
        got = (1.0, R.coefficient({"y": 1}) / c, R.coefficient({"x": 1}) / c)
        assert got == pytest.approx((1.0, -rho, -(1 + rho * a)), abs=1e-12)

    def test_equilibrium(self):
        tr = samuelson_simulate(SamuelsonParams(0.5, 0.0, 0.0, 0.2, 0.5), 0.0, 0.0, 1.0, 1 / 64)
        assert np.all(tr.x == 0.0)

    def test_classical_closed_form(self):
        P = SamuelsonParams(0.5, 0.2, 0.5, 0.3, 1.0)
        tr = samuelson_simulate(P, 1.0, 0.0, 1.0, 1 / 512)
        exact = samuelson_classical_solution(P, 1.0, 0.0, tr.t)
        assert exact[-1] == pytest.approx(SAMUELSON_X1, rel=1e-14)
        assert np.max(np.abs(tr.x[:, 0] - exact)) < 1e-3

    def test_fractional_residual_shrinks(self):
        P = SamuelsonParams(0.5, 1.0, 0.5, 0.3, 0.7)
        res = [samuelson_residual(P, samuelson_simulate(P, 1.0, 0.0, 1.0, h), t_min=0.1).max() for h in (1 / 256, 1 / 512)]
        assert res[0] / res[1] >= 1.8

    def test_orthant_guard(self):
        with pytest.raises(IntegrationError):
            samuelson_simulate(SamuelsonParams(0.5, 0.2, -0.5, 0.0, 0.5), 1.0, 0.0, 1.0, 1 / 64)
        with pytest.raises(DomainError):
            samuelson_simulate(SamuelsonParams(0.5, 0.2, 0.5, 0.0, 0.5), -1.0, 0.0, 1.0, 1 / 64)

    def test_singular(self):
        with pytest.raises(DomainError):
            SamuelsonParams(0.0, 1.0, 1.0)


class TestLiviatan:
    def test_linear_utility(self):
        al, rho = 0.5, 0.4
        g = parse_poly("3*x^(1+a)", al)
        x = 0.8
        Dg = 3 * gamma_fn(2 + al) / gamma_fn(2) * x
        r = liviatan_el_residual(lambda c: 1.0, lambda c: 0.0, g, al, rho, x, 0.2)
        assert r == pytest.approx(rho * gamma_fn(1 + al) - Dg, rel=1e-13)

    def test_zero_velocity_no_discount(self):
        al = 0.7
        g = parse_poly("2*x", al)
        x = 1.5
        Dg = 2 * gamma_fn(2) / gamma_fn(2 - al) * x ** (1 - al)
        dU = lambda c: 1 / c
        r = liviatan_el_residual(dU, lambda c: -1 / c**2, g, al, 0.0, x, 0.0)
        assert r == pytest.approx(-dU(2 * x) * Dg, rel=1e-13)

    @pytest.mark.parametrize("x, y, y2", [(1.0, 0.3, -0.2), (2.0, -0.5, 1.0)])
    def test_classical_oracle(self, x, y, y2):
        # L1 = log(b x - x'):  U'' x'' - b U'' x' + rho U' - b U'
        b, rho = 1.5, 0.05
        c = b * x - y
        up, upp = 1 / c, -1 / c**2
        hand = upp * y2 - b * upp * y + rho * up - b * up
        got = liviatan_el_residual(lambda c: 1 / c, lambda c: -1 / c**2, parse_poly("1.5*x"), 1.0, rho, x, y, y2=y2, domain=(0, math.inf))
        assert got == pytest.approx(hand, rel=1e-12)

    def test_golden_rule(self):
        # D^a g = rho G1 with g = x^(1+a)
        al, rho = 0.5, 0.3
        g = parse_poly("x^(1+a)", al)
        xs = liviatan_steady_state(lambda c: 1.0, lambda c: 0.0, g, al, rho, (1e-6, 10.0))
        assert gamma_fn(2 + al) * xs == pytest.approx(rho * gamma_fn(1 + al), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            liviatan_el_residual(lambda c: 1 / c, lambda c: -1 / c**2, parse_poly("x"), 0.5, 0.1, 1.0, 2.0, domain=(0, math.inf))


class TestHomogeneity:
    @pytest.mark.parametrize("al, gam", [(0.5, 0.3), (0.3, 1.7), (0.8, 2.0)])
    def test_monomial(self, al, gam):
        h = check_homogeneity(FracPoly.var("K", gam), al)
        expected = gamma_fn(1 + al) * gamma_fn(1 + gam) / gamma_fn(1 + gam - al)
        assert h.ok and h.r == pytest.approx(expected, rel=1e-13)

    def test_constant(self):
        h = check_homogeneity(FracPoly.const(2.0), 0.5)
        assert h.ok and h.r == 0.0

    def test_mismatch(self):
        h = check_homogeneity(parse_poly("K^0.3 * I^0.4 + K^0.5"), 0.5)
        assert not h.ok and not h.defect.is_zero

    @pytest.mark.parametrize("al", [0.3, 0.5, 0.7, 1.0])
    def test_unit_degree(self, al):
        e = unit_degree_exponent(al)
        h = check_homogeneity(FracPoly.var("K", e), al)
        assert h.r == pytest.approx(1.0, abs=1e-11)

    def test_unit_degree_exact_at_half(self):
        assert unit_degree_exponent(0.5) == 1.0


class TestInvestmentDerive:
    def test_unconstrained_reduction(self):
        spec = fixture(rho=0.0)
        sys = investment_derive(spec)
        pt = {"K": 1.2, "I": 0.7, "N": 0.4, "lambda": 0.0, "dlambda": 0.0, "E": 1.0,
              "y_K": 0.3, "y_I": 0.1, "y_N": 0.2, "y2_K": 0.0, "y2_I": 0.0, "y2_N": 0.0}
        from fracjet.fracpoly import frac_partial

        expected = [float(frac_partial(spec.L1, v, spec.order).eval(pt)) for v in ("K", "I", "N")]
        np.testing.assert_allclose(sys.evaluate(pt), expected, rtol=1e-13)

    def test_monomial_coefficients(self):
        al = 0.5
        spec = InvestmentSpec(parse_poly("K^0.8 * I^0.3 * N^0.4"), parse_poly("K^0.5 * I^0.3 * N^0.2"), 0.0, al)
        R = investment_derive(spec).residuals[1]
        gI = gamma_fn(1.3) / gamma_fn(0.8)
        from fractions import Fraction as F

        assert R.coefficient({"E": 1, "K": F(4, 5), "I": F(-1, 5), "N": F(2, 5)}) == pytest.approx(gI, rel=1e-13)
        assert R.coefficient({"lambda": 1, "K": F(1, 2), "I": F(-1, 5), "N": F(1, 5)}) == pytest.approx(gI, rel=1e-13)
        assert len(R) == 2

    def test_classical_conditions(self):
        spec = fixture(alpha=1.0, rho=0.3)
        sys = investment_derive(spec)
        K, I, N, lam, dlam, E = 1.3, 0.6, 0.9, -0.4, 0.25, 0.8
        L = K**0.3 * I**0.4 * N**0.2
        pt = {"K": K, "I": I, "N": N, "lambda": lam, "dlambda": dlam, "E": E}
        hand = [E * 0.3 * L / K - 0.1 * lam + dlam, E * 0.4 * L / I + lam, E * 0.2 * L / N + 0.2 * lam]
        np.testing.assert_allclose(sys.evaluate(pt), hand, rtol=1e-13)

    def test_strict_mode_swaps_term(self):
        spec = fixture()
        a, b = investment_derive(spec), investment_derive(spec, strict_paper=True)
        pt = {"K": 1.0, "I": 1.0, "N": 1.0, "lambda": 1.0, "dlambda": 0.0, "E": 1.0}
        # D_I phi = 1, D_K phi = -0.1 / Gamma(1.5) * ... differ
        assert a.evaluate(pt)[1] != b.evaluate(pt)[1]
        assert a.evaluate(pt)[0] == b.evaluate(pt)[0]


class TestInvestmentSimulate:
    def test_steady_state_preserved(self):
        spec = InvestmentSpec(parse_poly("K^0.5 - I^2 - N^2"), parse_poly(FIXTURE_PHI), 0.0, 0.5)
        z = find_steady_state(spec, [5.0, 0.3, 0.3, 1.0])
        tr = investment_simulate(spec, z[0], z[1], z[2], 1.0, 1 / 64)
        assert np.max(np.abs(tr.x - z[:3])) < 1e-10
        assert np.max(np.abs(tr.lam - z[3])) < 1e-10

    def test_conditions_hold_along_run(self):
        spec = fixture()
        tr = investment_simulate(spec, 1.0, 0.5, 0.5, 0.5, 1 / 64)
        assert np.max(np.abs(investment_residuals(spec, tr))) < 1e-9

    def test_classical_against_reference_integration(self):
        rho, K0, I0 = 0.3, 1.0, 0.5
        c = 0.4 * 2.5**0.2

        def closure(t, K, lam):
            mu = -lam * math.exp(rho * t)
            I = (c * K**0.3 / mu) ** 2.5
            return I, 2.5 * I

        def rhs(t, z):
            K, lam = z
            I, N = closure(t, K, lam)
            L = K**0.3 * I**0.4 * N**0.2
            return [-0.1 * K + I + 0.2 * N, -(math.exp(-rho * t) * 0.3 * L / K - 0.1 * lam)]

        lam0 = -c * K0**0.3 * I0**-0.4
        tr = investment_simulate(fixture(alpha=1.0, rho=rho), K0, I0, 1.25, 1.0, 1 / 256)
        ref = solve_ivp(rhs, (0, 1), [K0, lam0], t_eval=tr.t, rtol=1e-11, atol=1e-13).y
        assert np.max(np.abs(tr.x[:, 0] - ref[0]) / np.abs(ref[0])) < 1e-2
        assert np.max(np.abs(tr.lam - ref[1]) / np.abs(ref[1])) < 1e-2

    def test_rejects_nonpositive_start(self):
        with pytest.raises(DomainError):
            investment_simulate(fixture(), 0.0, 0.5, 0.5, 1.0, 1 / 64)


class TestRelation:
    def test_fixture_passes(self):
        spec = fixture()
        tr = investment_simulate(spec, 1.0, 0.5, 0.5, 1.0, 1 / 256)
        rel = investment_relation_residual(tr, spec, t_min=0.1)
        assert rel.relative <= 1e-2
        assert rel.r == pytest.approx(2.0458505716841, rel=1e-12)

    def test_negative_control(self):
        r = check_homogeneity(parse_poly(FIXTURE_L1), 0.5).r
        spec = fixture(L1=FIXTURE_L1 + " + 0.5*K^0.9", r=r)
        tr = investment_simulate(spec, 1.0, 0.5, 0.5, 1.0, 1 / 256)
        assert investment_relation_residual(tr, spec, t_min=0.1).relative > 1e-1

    def test_nonhomogeneous_rejected_without_declared_degree(self):
        spec = fixture(L1=FIXTURE_L1 + " + 0.5*K^0.9")
        tr = Trajectory(np.linspace(0, 1, 5), 0.5, np.ones((5, 3)), lam=np.ones(5))
        with pytest.raises(DomainError):
            investment_relation_residual(tr, spec)

    def test_zero_trajectory(self):
        spec = fixture()
        tr = Trajectory(np.linspace(0, 1, 9), 0.5, np.zeros((9, 3)), lam=np.zeros(9))
        rel = investment_relation_residual(tr, spec)
        assert rel.max_abs == 0.0 and rel.relative == 0.0
