"""Economic applications: the fractional Liviatan-Samuelson model and the
investment model with an accumulation constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from fracjet.errors import DomainError, FracJetError, IntegrationError
from fracjet.fdesolve import Trajectory, abm_integrate, solve_fvf, _validate_grid
from fracjet.fracpoly import Chart, FracPoly, frac_partial
from fracjet.gridops import SampledFunction, caputo_left, classical_derivative
from fracjet.specfun import FracOrder, as_order, gamma_fn, gamma_ratio, ml_discount
from fracjet.variational import (
    ELSystem,
    LagrangianSpec,
    derive_constrained_el,
    derive_el_discounted,
    el_trajectory_residual,
)

INVESTMENT_VARS = ("K", "I", "N")


def _deriv_order(order: FracOrder):
    return order.alpha if order.is_classical else order


# Liviatan-Samuelson


@dataclass(frozen=True)
class SamuelsonParams:
    """Quadratic-type utility ``L1 = -a1 y^(2a) - a2 y^a x^a - a3 x^(2a)``."""

    a1: float
    a2: float
    a3: float
    rho: float = 0.0
    order: FracOrder = field(default_factory=lambda: FracOrder(0.5))

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", as_order(self.order, allow_classical=True))
        if self.a1 == 0:
            raise DomainError("a1 = 0 makes the velocity Hessian singular")
        if self.rho < 0 or not math.isfinite(self.rho):
            raise DomainError(f"discount rate must be finite and >= 0, got {self.rho}")

    def lagrangian(self) -> FracPoly:
        a = self.order.exact
        return FracPoly(
            [
                (-self.a1, {"y": 2 * a}),
                (-self.a2, {"y": a, "x": a}),
                (-self.a3, {"x": 2 * a}),
            ]
        )

    def spec(self) -> LagrangianSpec:
        return LagrangianSpec(self.lagrangian(), self.order, 1, discount_rho=self.rho)

    def reference_equation(self) -> FracPoly:
        """The four-term closed form of the Euler-Lagrange equation (scaled by ``Gamma(1+alpha)``)."""
        al = self.order.alpha
        a = self.order.exact
        g1, g2 = gamma_fn(1 + al), gamma_fn(1 + 2 * al)
        a1, a2, a3, rho = self.a1, self.a2, self.a3, self.rho
        return FracPoly(
            [
                (a1 * g1 * g2, {"y2": 1}),
                (-(a2 * g1**2 + rho * a1 * g2), {"y": a}),
                (a2 * g1**3, {"y": 1}),
                (-(a3 * g2 + rho * a2 * g1**2), {"x": a}),
            ]
        )


def samuelson_derive(params: SamuelsonParams) -> ELSystem:
    """Discounted Euler-Lagrange equation, checked against the closed form."""
    system = derive_el_discounted(params.spec())
    g1 = gamma_fn(1 + params.order.alpha)
    if not (system.residuals[0] * g1).allclose(params.reference_equation(), rtol=1e-12, atol=1e-14):
        raise FracJetError("derived equation disagrees with the closed form")
    return system


def _fvf_force(system: ELSystem, context: Callable[[float], dict] | None = None):
    """``F(t, [x, v])`` with ``D^a v = F`` for ``v = Gamma(1+alpha) y``."""
    ch = system.chart
    n = ch.n
    G1 = gamma_fn(1 + system.order.alpha)
    C = system.y2_coefficients()
    rem = system.remainder()

    def F(t: float, z: np.ndarray) -> np.ndarray:
        x, v = z[:n], z[n:]
        point = {ch.t: t, **dict(zip(ch.x, x)), **dict(zip(ch.y, v / G1))}
        if context is not None:
            point.update(context(t))
        A = np.array([[c.eval(point) for c in row] for row in C], dtype=float)
        b = np.array([R.eval(point) for R in rem], dtype=float)
        return -G1 * np.linalg.solve(A, b)

    return F


def samuelson_simulate(
    params: SamuelsonParams,
    x0: float,
    v0: float,
    horizon: float,
    step: float,
) -> Trajectory:
    """Integrate the Euler-Lagrange equation; adds the momentum channel
    ``p = E_alpha(-rho t^alpha) D_y L1``."""
    system = samuelson_derive(params)
    q = params.order
    fractional = not q.is_classical
    if fractional and (x0 < 0 or v0 < 0):
        raise DomainError("fractional powers need nonnegative initial data")

    def guard(t: float, z: np.ndarray) -> str | None:
        if fractional and np.any(z < 0):
            return "trajectory left the positive orthant"
        return None

    traj = solve_fvf(q, _fvf_force(system), [x0], [v0], horizon, step, guard=guard)
    P = frac_partial(params.lagrangian(), "y", _deriv_order(q))
    y = traj.y[:, 0]
    p = P.eval({"x": traj.x[:, 0], "y": y}) * ml_discount(q, params.rho, traj.t)
    traj.p = np.broadcast_to(p, traj.t.shape).reshape(-1, 1).copy()
    return traj


def samuelson_residual(params: SamuelsonParams, traj: Trajectory, t_min: float = 0.0) -> np.ndarray:
    """Absolute Euler-Lagrange residual at the nodes ``t >= t_min`` (node 0 excluded)."""
    r = el_trajectory_residual(samuelson_derive(params), traj, skip=0)[:, 0]
    mask = traj.t >= t_min
    mask[0] = False
    return r[mask]


def samuelson_classical_solution(params: SamuelsonParams, x0: float, v0: float, t: np.ndarray) -> np.ndarray:
    """Closed-form solution of the ``alpha = 1`` equation ``2 a1 x'' - 2 rho a1 x' - (2 a3 + rho a2) x = 0``."""
    a, b, c = 2 * params.a1, -2 * params.rho * params.a1, -(2 * params.a3 + params.rho * params.a2)
    disc = b * b - 4 * a * c
    t = np.asarray(t, dtype=float)
    if disc > 0:
        r1, r2 = (-b + math.sqrt(disc)) / (2 * a), (-b - math.sqrt(disc)) / (2 * a)
        c2 = (v0 - r1 * x0) / (r2 - r1)
        c1 = x0 - c2
        return c1 * np.exp(r1 * t) + c2 * np.exp(r2 * t)
    if disc == 0:
        r = -b / (2 * a)
        return (x0 + (v0 - r * x0) * t) * np.exp(r * t)
    mu, om = -b / (2 * a), math.sqrt(-disc) / (2 * a)
    return np.exp(mu * t) * (x0 * np.cos(om * t) + (v0 - mu * x0) / om * np.sin(om * t))


def liviatan_el_residual(
    dU: Callable[[float], float],
    d2U: Callable[[float], float],
    g: FracPoly,
    order: FracOrder | float,
    rho: float,
    x: float,
    y: float,
    y2: float | None = None,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> float:
    """Euler-Lagrange residual of ``L1 = U(g(x) - y)`` at ``(x, y)``.

    The first term carries ``y^(2 alpha)``; passing ``y2`` replaces that power
    by the second symbol.
    """
    q = as_order(order, allow_classical=True)
    G1 = gamma_fn(1 + q.alpha)
    if g.variables - {"x"}:
        raise DomainError("g must be a polynomial in x only")
    c = float(g.eval({"x": x})) - y
    if not domain[0] <= c <= domain[1]:
        raise DomainError(f"consumption {c} outside the utility domain {domain}")
    Dg = float(frac_partial(g, "x", _deriv_order(q)).eval({"x": x}))
    first = y2 if y2 is not None else y ** (2 * q.alpha)
    return G1**2 * d2U(c) * first - G1 * Dg * d2U(c) * y + rho * dU(c) * G1 - dU(c) * Dg


def liviatan_steady_state(
    dU: Callable[[float], float],
    d2U: Callable[[float], float],
    g: FracPoly,
    order: FracOrder | float,
    rho: float,
    bracket: tuple[float, float],
) -> float:
    """Root in ``x`` of the ``y = 0`` residual on ``bracket``."""
    f = lambda x: liviatan_el_residual(dU, d2U, g, order, rho, x, 0.0)  # noqa: E731
    return optimize.brentq(f, *bracket, xtol=1e-14)


# homogeneity


@dataclass(frozen=True)
class Homogeneity:
    ok: bool
    r: float | None
    defect: FracPoly


def check_homogeneity(P: FracPoly, order: FracOrder | float, variables: Sequence[str] = INVESTMENT_VARS) -> Homogeneity:
    """Test ``sum_v v^a D_v^a P = (r / Gamma(1+alpha)) P`` and return ``r``."""
    q = as_order(order, allow_classical=True)
    G1 = gamma_fn(1 + q.alpha)
    lhs = FracPoly()
    for v in variables:
        lhs = lhs + FracPoly.var(v, q.exact) * frac_partial(P, v, _deriv_order(q))
    if P.is_zero:
        return Homogeneity(lhs.is_zero, 0.0 if lhs.is_zero else None, lhs)
    mono, c = max(P.items(), key=lambda mc: abs(mc[1]))
    s = lhs.coefficient(dict(mono)) / c
    defect = lhs - P * s
    scale = max(abs(cc) for _, cc in P.items())
    ok = all(abs(cc) <= 1e-12 * scale * max(1.0, abs(s)) for _, cc in defect.items())
    return Homogeneity(ok, G1 * s if ok else None, defect)


def unit_degree_exponent(order: FracOrder | float) -> float:
    """``e`` with ``Gamma(1+e)/Gamma(1+e-alpha) = 1/Gamma(1+alpha)``, the degree-one power."""
    q = as_order(order, allow_classical=True)
    al = q.alpha
    if q.is_classical:
        return 1.0
    target = 1.0 / gamma_fn(1 + al)
    e = optimize.brentq(lambda e: gamma_ratio(1 + e, 1 + e - al) - target, 1e-9, 10.0, xtol=1e-15)
    # snap to 12 digits so that exact cases (alpha = 1/2 gives e = 1) come out exact
    return round(e, 12)


# investment model


@dataclass(frozen=True)
class InvestmentSpec:
    """Utility ``L1(K, I, N)`` and accumulation law ``D^a K = phi(K, I, N)``.

    ``r`` may declare the homogeneity degree of ``L1``; when absent it is
    computed by :func:`check_homogeneity`.
    """

    L1: FracPoly
    phi: FracPoly
    rho: float = 0.0
    order: FracOrder = field(default_factory=lambda: FracOrder(0.5))
    r: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", as_order(self.order, allow_classical=True))
        for name, P in (("L1", self.L1), ("phi", self.phi)):
            extra = P.variables - set(INVESTMENT_VARS)
            if extra:
                raise DomainError(f"{name} may depend on K, I, N only, got {sorted(extra)}")
        if self.rho < 0:
            raise DomainError("discount rate must be >= 0")

    @property
    def chart(self) -> Chart:
        return Chart.named(INVESTMENT_VARS)

    def constraint(self) -> FracPoly:
        """``phi - y_K^a / Gamma(1+alpha)``, whose ``y_K`` derivative is exactly ``-1``."""
        q = self.order
        return self.phi - FracPoly.var("y_K", q.exact, 1.0 / gamma_fn(1 + q.alpha))


def investment_derive(spec: InvestmentSpec, strict_paper: bool = False) -> ELSystem:
    """Three first-order conditions in ``K, I, N, lambda, dlambda, E``.

    ``strict_paper`` swaps ``lambda D_I phi`` for ``lambda D_K phi`` in the
    investment equation.
    """
    ch = spec.chart
    L = LagrangianSpec(spec.L1, spec.order, discount_rho=spec.rho, chart=ch)
    system = derive_constrained_el(L, spec.constraint())
    if not strict_paper:
        return system
    q = _deriv_order(spec.order)
    lam = FracPoly.var(ch.lam)
    res = list(system.residuals)
    res[1] = res[1] - lam * frac_partial(spec.phi, "I", q) + lam * frac_partial(spec.phi, "K", q)
    return ELSystem(tuple(res), system.order, ch, discounted=True, constrained=True)


class _InvestmentAlgebra:
    """Evaluators for the investment first-order conditions."""

    def __init__(self, spec: InvestmentSpec, strict_paper: bool = False) -> None:
        q = _deriv_order(spec.order)
        self.spec = spec
        self.system = investment_derive(spec, strict_paper)
        self.phi = spec.phi
        self.dL = {v: frac_partial(spec.L1, v, q) for v in INVESTMENT_VARS}
        self.dphi = {v: frac_partial(spec.phi, v, q) for v in INVESTMENT_VARS}
        self.strict = strict_paper

    def disc(self, t):
        return ml_discount(self.spec.order, self.spec.rho, t)

    def static(self, K: float, I: float, N: float, lam: float, E: float) -> np.ndarray:
        pt = {"K": K, "I": I, "N": N}
        dphi_I = self.dphi["K" if self.strict else "I"]
        r2 = E * self.dL["I"].eval(pt) + lam * dphi_I.eval(pt)
        r3 = E * self.dL["N"].eval(pt) + lam * self.dphi["N"].eval(pt)
        s2 = abs(E * self.dL["I"].eval(pt)) + abs(lam * dphi_I.eval(pt)) + 1e-300
        s3 = abs(E * self.dL["N"].eval(pt)) + abs(lam * self.dphi["N"].eval(pt)) + 1e-300
        return np.array([r2 / s2, r3 / s3])

    def solve_in(self, K: float, lam: float, E: float, guess: tuple[float, float]) -> tuple[float, float]:
        """``(I, N)`` from the investment and labour conditions, solved in log space."""
        if K <= 0:
            raise DomainError(f"capital left the positive orthant (K={K})")

        def f(u: np.ndarray) -> np.ndarray:
            I, N = np.exp(u)
            return self.static(K, I, N, lam, E)

        sol = optimize.root(f, np.log(guess), method="hybr", options={"xtol": 1e-13})
        if not np.all(np.isfinite(sol.fun)) or np.max(np.abs(sol.fun)) > 1e-10:
            raise IntegrationError(f"algebraic closure failed: {sol.message}")
        I, N = np.exp(sol.x)
        return float(I), float(N)

    def dynamics(self, K: float, I: float, N: float, lam: float, E: float) -> tuple[float, float]:
        """``(D^a K, D^a lambda)`` from the constraint and the capital condition."""
        pt = {"K": K, "I": I, "N": N}
        dK = float(self.phi.eval(pt))
        dlam = -(E * float(self.dL["K"].eval(pt)) + lam * float(self.dphi["K"].eval(pt)))
        return dK, dlam


def investment_initial(spec: InvestmentSpec, K0: float, I0: float, N0: float, strict_paper: bool = False):
    """Consistent ``(lambda0, N0)`` at ``t = 0`` for given ``K0, I0`` (``N0`` is the starting guess)."""
    alg = _InvestmentAlgebra(spec, strict_paper)
    E0 = 1.0

    pt = {"K": K0, "I": I0, "N": N0}
    dphi_I = alg.dphi["K" if strict_paper else "I"].eval(pt)
    lam_guess = -float(alg.dL["I"].eval(pt)) / float(dphi_I) if dphi_I else -1.0
    sign = -1.0 if lam_guess <= 0 else 1.0

    def g(u: np.ndarray) -> np.ndarray:
        lam, N = sign * math.exp(u[0]), math.exp(u[1])
        return alg.static(K0, I0, N, lam, E0)

    sol = optimize.root(g, [math.log(abs(lam_guess) or 1.0), math.log(N0)], method="hybr", options={"xtol": 1e-13})
    if not np.all(np.isfinite(sol.fun)) or np.max(np.abs(sol.fun)) > 1e-10:
        raise DomainError(f"no consistent initial multiplier: {sol.message}")
    return sign * math.exp(sol.x[0]), math.exp(sol.x[1])


def investment_simulate(
    spec: InvestmentSpec,
    K0: float,
    I0: float,
    N0: float,
    horizon: float,
    step: float,
    strict_paper: bool = False,
) -> Trajectory:
    """Semi-explicit integration of the investment model.

    ``K`` and ``lambda`` are integrated with the predictor-corrector scheme
    (``D^a K = phi``, ``D^a lambda`` from the capital condition); at every
    evaluation ``(I, N)`` are re-solved from the investment and labour
    conditions, continuing from the last accepted values. ``lambda(0)`` and
    ``N(0)`` are made consistent with ``K0, I0`` first.
    """
    if min(K0, I0, N0) <= 0:
        raise DomainError("initial state must lie in the positive orthant")
    q = spec.order
    steps = _validate_grid(horizon, step)
    alg = _InvestmentAlgebra(spec, strict_paper)
    lam0, N0 = investment_initial(spec, K0, I0, N0, strict_paper)
    last = [I0, N0]
    # the final evaluation at each node is the one at the accepted state
    accepted: dict[float, tuple[float, float]] = {}

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        K, lam = z
        E = float(alg.disc(t))
        I, N = alg.solve_in(K, lam, E, tuple(last))
        last[:] = [I, N]
        accepted[t] = (I, N)
        return np.array(alg.dynamics(K, I, N, lam, E))

    t, Y, F = abm_integrate(q.alpha, rhs, np.array([K0, lam0]), steps, step)
    IN = np.array([accepted[tk] for tk in t])
    x = np.column_stack([Y[:, 0], IN])
    return Trajectory(
        t,
        q.alpha,
        x,
        lam=Y[:, 1],
        extra={"dK": F[:, 0], "dlambda": F[:, 1]},
        names=INVESTMENT_VARS,
    )


def investment_residuals(spec: InvestmentSpec, traj: Trajectory, strict_paper: bool = False) -> np.ndarray:
    """First-order-condition residuals along ``traj`` using its ``dlambda`` channel."""
    system = investment_derive(spec, strict_paper)
    ch = system.chart
    K, I, N = traj.x.T
    point = {
        **dict(zip(ch.x, (K, I, N))),
        ch.lam: traj.lam,
        ch.dlam: traj.extra["dlambda"],
        ch.disc: ml_discount(spec.order, spec.rho, traj.t),
        **{yi: np.zeros_like(K) for yi in ch.y},
        **{zi: np.zeros_like(K) for zi in ch.y2},
    }
    point["y_K"] = traj.extra["dK"] / gamma_fn(1 + spec.order.alpha)
    return np.column_stack([np.broadcast_to(R.eval(point), K.shape) for R in system.residuals])


def find_steady_state(
    spec: InvestmentSpec,
    guess: Sequence[float],
    strict_paper: bool = False,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> np.ndarray:
    """Damped Newton for ``(K, I, N, lambda)`` with ``phi = 0`` and ``D^a lambda = 0`` at ``E = 1``.

    Positions are projected back to the positive orthant after every step.
    """
    alg = _InvestmentAlgebra(spec, strict_paper)

    def G(z: np.ndarray) -> np.ndarray:
        K, I, N, lam = z
        dK, dlam = alg.dynamics(K, I, N, lam, 1.0)
        pt = {"K": K, "I": I, "N": N}
        dphi_I = alg.dphi["K" if strict_paper else "I"]
        return np.array(
            [
                dK,
                dlam,
                float(alg.dL["I"].eval(pt) + lam * dphi_I.eval(pt)),
                float(alg.dL["N"].eval(pt) + lam * alg.dphi["N"].eval(pt)),
            ]
        )

    z = np.asarray(guess, dtype=float)
    for _ in range(max_iter):
        g = G(z)
        if np.max(np.abs(g)) <= tol:
            return z
        J = np.empty((4, 4))
        for j in range(4):
            dz = 1e-7 * max(1.0, abs(z[j]))
            e = np.zeros(4)
            e[j] = dz
            J[:, j] = (G(z + e) - G(z - e)) / (2 * dz)
        delta = np.linalg.lstsq(J, -g, rcond=None)[0]
        lam_step = 1.0
        while lam_step > 1e-8:
            trial = z + lam_step * delta
            trial[:3] = np.maximum(trial[:3], 1e-12)
            if np.linalg.norm(G(trial)) < np.linalg.norm(g):
                z = trial
                break
            lam_step /= 2
        else:
            raise DomainError("damped Newton stalled")
    if np.max(np.abs(G(z))) > max(tol, 1e-9):
        raise DomainError("damped Newton did not converge")
    return z


@dataclass(frozen=True)
class RelationResidual:
    max_abs: float
    mean_abs: float
    relative: float
    r: float
    t_min: float


def investment_relation_residual(
    traj: Trajectory,
    spec: InvestmentSpec,
    t_min: float = 0.0,
) -> RelationResidual:
    """``r E L1 + lambda K^(a) + Gamma(1+alpha) K^a lambda^(a)`` along ``traj``.

    ``K^(a)`` and ``lambda^(a)`` are grid derivatives of the ``K`` and
    ``lambda`` channels. Nodes with ``t < t_min`` and the first node are
    excluded. ``relative`` divides by the largest magnitude of the three terms.
    """
    if traj.lam is None:
        raise DomainError("trajectory carries no multiplier channel")
    q = spec.order
    if spec.r is not None:
        r = float(spec.r)
    else:
        hom = check_homogeneity(spec.L1, q)
        if not hom.ok:
            raise DomainError("L1 does not satisfy the homogeneity relation")
        r = hom.r
    phi_h = check_homogeneity(spec.phi, q)
    if not (phi_h.ok and abs(phi_h.r - 1.0) <= 1e-10):
        raise DomainError("phi must be homogeneous of degree one")

    h = traj.step
    K, I, N = traj.x.T

    def deriv(values: np.ndarray) -> np.ndarray:
        f = SampledFunction(0.0, h, values)
        return classical_derivative(f).values if q.is_classical else caputo_left(f, q.alpha).values

    G1 = gamma_fn(1 + q.alpha)
    E = ml_discount(q, spec.rho, traj.t)
    L1 = spec.L1.eval({"K": K, "I": I, "N": N})
    terms = np.vstack([r * E * L1, traj.lam * deriv(K), G1 * K**q.alpha * deriv(traj.lam)])
    mask = traj.t >= t_min
    mask[0] = False
    res = np.abs(terms.sum(axis=0))[mask]
    scale = float(np.max(np.abs(terms[:, mask])))
    return RelationResidual(float(res.max()), float(res.mean()), float(res.max()) / max(scale, 1e-300), r, t_min)
