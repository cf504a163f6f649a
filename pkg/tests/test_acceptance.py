"""Acceptance criteria, each at its stated tolerance."""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from fracjet.fdesolve import solve_alpha_system
from fracjet.fracpoly import FracPoly, frac_partial, parse_poly, taylor_reconstruct
from fracjet.gridops import SampledFunction, caputo_left
from fracjet.jetgeo import interior_product_residual, pairing_table, random_points
from fracjet.models import (
    InvestmentSpec,
    SamuelsonParams,
    check_homogeneity,
    investment_relation_residual,
    investment_simulate,
    samuelson_simulate,
)
from fracjet.specfun import FracOrder, as_order, gamma_fn, mittag_leffler
from fracjet.variational import LagrangianSpec, derive_el_discounted, legendre, verify_hamilton

ALPHA_LATTICE = (0.3, 0.5, 0.7)


def test_power_rule_accuracy(criterion):
    start = time.perf_counter()
    f = lambda n: SampledFunction.from_callable(lambda t: t**1.6, 0.0, 1.0, n)  # noqa: E731
    d512 = caputo_left(f(512), 0.5)
    exact = gamma_fn(2.6) / gamma_fn(2.1) * d512.grid**1.1
    err = float(np.max(np.abs(d512.values - exact)))
    # Richardson estimate from three nested grids, compared on the coarse nodes
    d1024 = caputo_left(f(1024), 0.5).values[::2]
    d2048 = caputo_left(f(2048), 0.5).values[::4]
    order = math.log2(np.max(np.abs(d512.values - d1024)) / np.max(np.abs(d1024 - d2048)))
    elapsed = time.perf_counter() - start
    ok = err <= 5e-3 and 1.25 <= order <= 1.75 and elapsed < 1.0
    criterion(1, "power-rule accuracy", ok, f"max error {err:.3e}, Richardson order {order:.3f}, {elapsed:.2f}s")
    assert ok


def test_classical_limit(criterion):
    f = SampledFunction.from_callable(np.sin, 0.0, 1.0, 1024)
    errs = [float(np.max(np.abs(caputo_left(f, a).values[1:] - np.cos(f.grid[1:])))) for a in (0.9, 0.99, 0.999)]
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 1e-2
    criterion(2, "classical limit", ok, "errors " + ", ".join(f"{e:.3e}" for e in errs))
    assert ok


def test_mittag_leffler_eigenfunction(criterion):
    errs = []
    for h in (1 / 256, 1 / 512):
        tr = solve_alpha_system(0.5, lambda t, y: -y, [1.0], 1.0, h)
        ref = np.array([mittag_leffler(0.5, -math.sqrt(t)) for t in tr.t])
        errs.append(float(np.max(np.abs(tr.x[:, 0] - ref))))
    ratio = errs[0] / errs[1]
    ok = errs[0] <= 1e-3 and ratio >= 1.8
    criterion(3, "Mittag-Leffler eigenfunction", ok, f"max error {errs[0]:.3e} at h=1/256, ratio {ratio:.3f}")
    assert ok


def test_discounted_equation_lattice(criterion):
    start = time.perf_counter()
    worst = 0.0
    for al in (0.3, 0.5, 0.8):
        q = FracOrder(al)
        a = q.exact
        g1, g2 = gamma_fn(1 + al), gamma_fn(1 + 2 * al)
        for rho in (0.0, 0.3):
            for a1, a2, a3 in ((0.5, 1.0, 0.5), (1.0, 0.0, 1.0), (2.0, 0.5, 0.1)):
                L1 = FracPoly([(-a1, {"y": 2 * a}), (-a2, {"y": a, "x": a}), (-a3, {"x": 2 * a})])
                R = derive_el_discounted(LagrangianSpec(L1, q, discount_rho=rho)).residuals[0] * g1
                ref = {
                    (("y2", Fraction(1)),): a1 * g1 * g2,
                    (("y", a),): -(a2 * g1**2 + rho * a1 * g2),
                    (("y", Fraction(1)),): a2 * g1**3,
                    (("x", a),): -(a3 * g2 + rho * a2 * g1**2),
                }
                ref = {k: v for k, v in ref.items() if v != 0.0}
                got = dict(R.items())
                if set(got) != set(ref):
                    worst = math.inf
                    continue
                for k, v in ref.items():
                    worst = max(worst, abs(got[k] - v) / abs(v))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    criterion(4, "discounted equation reproduction", ok, f"max relative deviation {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_classical_samuelson_reduction(criterion):
    worst = 0.0
    for a in (0.2, 1.0, -0.7):
        for rho in (0.0, 0.3, 1.5):
            R = derive_el_discounted(SamuelsonParams(0.5, a, 0.5, rho, 1.0).spec()).residuals[0]
            c = R.coefficient({"y2": 1})
            got = np.array([1.0, R.coefficient({"y": 1}) / c, R.coefficient({"x": 1}) / c])
            # hand derivation: d/dt(e^{-rho t} L_v) = e^{-rho t} L_x with L = -v^2/2 - a x v - x^2/2
            # gives -x'' + rho x' + (1 + rho a) x = 0, i.e. x'' - rho x' - (1 + rho a) x = 0
            hand = np.array([1.0, -rho, -(1 + rho * a)])
            worst = max(worst, float(np.max(np.abs(got - hand))))
    ok = worst <= 1e-12
    criterion(5, "classical reduction", ok, f"max coefficient deviation {worst:.2e}")
    assert ok


def test_pairing_duality(criterion):
    worst = max(
        float(np.max(np.abs(pairing_table(al, n) - np.eye(2 * n + 1)))) for al in (0.3, 0.5, 0.9) for n in (1, 2, 3)
    )
    ok = worst <= 1e-12
    criterion(6, "pairing duality", ok, f"max deviation from identity {worst:.2e}")
    assert ok


def test_interior_product_annihilation(criterion):
    worst = {}
    for al in (0.5, 0.8):
        P = SamuelsonParams(0.5, 1.0, 0.5, 0.0, al)
        L = LagrangianSpec(P.lagrangian(), P.order)
        worst[al] = max(interior_product_residual(L, p) for p in random_points(1, 100, 42))
    P1 = SamuelsonParams(0.5, 1.0, 0.5, 0.0, 0.5)
    L1 = LagrangianSpec(P1.lagrangian(), P1.order)
    control = min(interior_product_residual(L1, p, perturbation=1e-2) for p in random_points(1, 100, 42))
    ok = all(v <= 1e-10 for v in worst.values()) and control > 1e-4
    detail = ", ".join(f"alpha={al}: {v:.3e}" for al, v in worst.items()) + f"; control {control:.3e}"
    criterion(7, "interior-product annihilation", ok, detail)
    assert ok


def test_hamilton_consistency(criterion):
    P = SamuelsonParams(0.5, 0.2, 0.5, 0.3, 1.0)
    H = legendre(P.spec())
    reps = [verify_hamilton(samuelson_simulate(P, 1.0, 0.0, 1.0, h), H) for h in (1 / 512, 1 / 1024)]
    rel = {k: reps[0][k]["relative"] for k in reps[0]}
    ratios = {k: reps[0][k]["relative"] / reps[1][k]["relative"] for k in reps[0]}
    ok = all(v <= 1e-2 for v in rel.values()) and all(r >= 1.8 for r in ratios.values())
    criterion(8, "Hamilton/bracket consistency", ok,
              f"max relative {max(rel.values()):.3e}, min ratio {min(ratios.values()):.3f}")
    assert ok


def test_investment_relation(criterion):
    al = 0.5
    phi = parse_poly("-0.1*K + I + 0.2*N", al)
    L1 = parse_poly("K^0.3 * I^0.4 * N^0.2", al)
    spec = InvestmentSpec(L1, phi, 0.3, al)
    rels = []
    for h in (1 / 256, 1 / 512):
        tr = investment_simulate(spec, 1.0, 0.5, 0.5, 1.0, h)
        rels.append(investment_relation_residual(tr, spec, t_min=0.1).relative)
    r = check_homogeneity(L1, al).r
    bad = InvestmentSpec(L1 + parse_poly("0.5*K^0.9"), phi, 0.3, al, r=r)
    control = investment_relation_residual(investment_simulate(bad, 1.0, 0.5, 0.5, 1.0, 1 / 512), bad, t_min=0.1).relative
    ok = rels[1] <= 1e-2 and rels[1] < rels[0] and control > 1e-1
    criterion(9, "investment relation", ok,
              f"relative {rels[1]:.3e} at h=1/512 ({rels[0]:.3e} at 1/256); control {control:.3e}")
    assert ok


def test_taylor_identity(criterion):
    rng = np.random.default_rng(20240610)
    worst = 0.0
    for i in range(50):
        al = ALPHA_LATTICE[i % 3]
        a = Fraction(repr(al))
        k_max = int(rng.integers(0, 6))
        ks = rng.choice(k_max + 1, size=int(rng.integers(1, k_max + 2)), replace=False)
        P = FracPoly([(float(rng.uniform(-2, 2)), {"t": int(k) * a}) for k in ks])
        D = taylor_reconstruct(P, al, k_max) - P
        worst = max([worst, *(abs(c) for _, c in D.items())])
    ok = worst <= 1e-14
    criterion(10, "Taylor identity", ok, f"max coefficient difference {worst:.2e}")
    assert ok


def test_symbolic_numeric_bridge(criterion):
    # exponents m + k*alpha restricted to 0 or >= 1: the regularity class of the power-rule criterion
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(20):
        al = ALPHA_LATTICE[i % 3]
        a = Fraction(repr(al))
        terms = []
        while len(terms) < int(rng.integers(1, 5)) or not terms:
            e = int(rng.integers(0, 3)) + int(rng.integers(0, 4)) * a
            if 0 < e < 1:
                continue
            terms.append((float(rng.uniform(-1, 1)), {"t": e}))
        P = FracPoly(terms)
        f = SampledFunction.from_callable(lambda t: np.broadcast_to(P.eval({"t": t}), t.shape), 0.0, 1.0, 512)
        num = caputo_left(f, al).values[1:]
        sym = np.broadcast_to(frac_partial(P, "t", FracOrder(al)).eval({"t": f.grid[1:]}), num.shape)
        worst = max(worst, float(np.max(np.abs(num - sym))))
    ok = worst <= 5e-3
    criterion(11, "symbolic/numeric bridge", ok, f"max deviation {worst:.3e}")
    assert ok
