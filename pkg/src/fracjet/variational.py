"""Fractional Euler-Lagrange systems, the regular-Lagrangian vector field,
the Legendre transform and fractional Poisson brackets.

All derivations are exact manipulations of :class:`~fracjet.fracpoly.FracPoly`
objects over a :class:`~fracjet.fracpoly.Chart`. Residuals are written as
``D_x L - d_t^{2 alpha}(D_y L)`` so that the coefficient of ``y2_j`` in the
``i``-th residual is ``-g_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize

from fracjet.errors import DomainError, InversionError, SingularMetricError
from fracjet.fracpoly import Chart, FracPoly, dt_2alpha_total, dt_alpha_total, frac_partial
from fracjet.gridops import SampledFunction, caputo_left, classical_derivative
from fracjet.specfun import FracOrder, as_order, gamma_fn, ml_discount

#: Determinants below this (relative to the entry scale) count as singular.
SINGULAR_RTOL = 1e-13


@dataclass(frozen=True)
class LagrangianSpec:
    """A polynomial Lagrangian ``L1(t, x, y)``, optionally discounted by
    ``E_alpha(-rho t^alpha)``.

    ``order`` may be the classical value 1 for integer-order reference runs.
    """

    base: FracPoly
    order: FracOrder
    n: int = 1
    discount_rho: float | None = None
    chart: Chart | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", as_order(self.order, allow_classical=True))
        chart = self.chart or Chart.standard(self.n)
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "n", chart.n)
        if self.n < 1:
            raise DomainError("a Lagrangian needs at least one coordinate")
        allowed = {chart.t, *chart.x, *chart.y}
        extra = self.base.variables - allowed
        if extra:
            raise DomainError(f"Lagrangian uses undeclared variables {sorted(extra)}")
        if self.discount_rho is not None:
            if self.discount_rho < 0 or not math.isfinite(self.discount_rho):
                raise DomainError(f"discount rate must be finite and >= 0, got {self.discount_rho}")
            if chart.t in self.base.variables:
                raise DomainError("a discounted base Lagrangian must not depend on t")

    @property
    def alpha(self) -> float:
        return self.order.alpha

    @property
    def discounted(self) -> bool:
        return self.discount_rho is not None


def _D(P: FracPoly, v: str, order: FracOrder) -> FracPoly:
    return frac_partial(P, v, order.alpha if order.is_classical else order)


@dataclass(frozen=True)
class ELSystem:
    """``n`` residual polynomials over ``(t, x, y, y2)`` and possibly the
    multiplier symbols; each residual is affine in the ``y2`` variables."""

    residuals: tuple[FracPoly, ...]
    order: FracOrder
    chart: Chart
    discounted: bool = False
    constrained: bool = False

    def __len__(self) -> int:
        return len(self.residuals)

    def y2_coefficients(self) -> list[list[FracPoly]]:
        """``C[i][j]``: the polynomial multiplying ``y2_j`` in residual ``i``."""
        out = []
        for R in self.residuals:
            row = []
            for z in self.chart.y2:
                parts = R.split_by(z)
                if set(parts) - {0, 1}:
                    raise DomainError(f"residual is not affine in {z}")
                row.append(parts.get(1, FracPoly()))
            out.append(row)
        return out

    def remainder(self) -> list[FracPoly]:
        """Residuals with every ``y2`` set to zero."""
        return [_drop_vars(R, self.chart.y2) for R in self.residuals]

    def evaluate(self, point: Mapping[str, float]) -> np.ndarray:
        return np.array([R.eval(point) for R in self.residuals], dtype=float)

    def solve_y2(self, point: Mapping[str, float]) -> np.ndarray:
        """Values of ``y2`` making every residual vanish at ``point`` (no y2 entries needed)."""
        C = np.array([[c.eval(point) for c in row] for row in self.y2_coefficients()], dtype=float)
        b = np.array([R.eval(point) for R in self.remainder()], dtype=float)
        return -_solve_regular(C, b, point)

    def to_text(self) -> str:
        a = self.order.alpha
        return "\n".join(f"{R.to_text(a)} = 0" for R in self.residuals) if self.residuals else "0 = 0"


def _drop_vars(P: FracPoly, names: Sequence[str]) -> FracPoly:
    drop = set(names)
    return FracPoly._raw({m: c for m, c in P.items() if not any(v in drop for v, _ in m)})


def _solve_regular(A: np.ndarray, b: np.ndarray, point: Mapping[str, float] | None) -> np.ndarray:
    scale = max(float(np.max(np.abs(A))), 1e-300) if A.size else 1.0
    det = float(np.linalg.det(A)) if A.size else 0.0
    if A.size == 0 or not math.isfinite(det) or abs(det) <= SINGULAR_RTOL * scale ** A.shape[0]:
        raise SingularMetricError(f"velocity Hessian is singular (det={det:.3g})", dict(point or {}))
    return np.linalg.solve(A, b)


def derive_el(L: LagrangianSpec) -> ELSystem:
    """``D_{x_i} L - d_t^{2 alpha}(D_{y_i} L)`` for an undiscounted Lagrangian."""
    if L.discounted:
        raise DomainError("derive_el expects an undiscounted Lagrangian; use derive_el_discounted")
    ch, q = L.chart, L.order
    res = []
    for xi, yi in zip(ch.x, ch.y):
        P = _D(L.base, yi, q)
        res.append(_D(L.base, xi, q) - dt_2alpha_total(P, ch, q.alpha))
    return ELSystem(tuple(res), q, ch)


def _discounted_part(L1: FracPoly, rho: float, ch: Chart, q: FracOrder, i: int) -> FracPoly:
    # D_x L1 + rho D_y L1 - y_j D_{x_j} D_{y_i} L1 - y2_j D_{y_j} D_{y_i} L1
    P = _D(L1, ch.y[i], q)
    out = _D(L1, ch.x[i], q) + rho * P
    for xj, yj, zj in zip(ch.x, ch.y, ch.y2):
        out = out - FracPoly.var(yj) * _D(P, xj, q) - FracPoly.var(zj) * _D(P, yj, q)
    return out


def derive_el_discounted(L: LagrangianSpec) -> ELSystem:
    """Euler-Lagrange system of ``L1 * E_alpha(-rho t^alpha)`` with the
    discount factor divided out.

    The time derivative of the discount factor is taken from its eigenvalue
    relation ``D_t^alpha E = -rho E``.
    """
    if not L.discounted:
        raise DomainError("derive_el_discounted needs discount_rho")
    ch, q = L.chart, L.order
    res = tuple(_discounted_part(L.base, L.discount_rho, ch, q, i) for i in range(ch.n))
    return ELSystem(res, q, ch, discounted=True)


def derive_constrained_el(L: LagrangianSpec, F: FracPoly) -> ELSystem:
    """Euler-Lagrange system of ``L + lambda F`` with ``lambda`` and its
    fractional derivative carried as the chart symbols ``lam`` and ``dlam``.

    For a discounted ``L`` the discount factor stays in the residuals as the
    symbol ``chart.disc``.
    """
    ch, q = L.chart, L.order
    extra = F.variables - {*ch.x, *ch.y}
    if extra:
        raise DomainError(f"constraint may depend on x and y only, got {sorted(extra)}")
    lam, dlam = FracPoly.var(ch.lam), FracPoly.var(ch.dlam)
    res = []
    for i in range(ch.n):
        if L.discounted:
            head = FracPoly.var(ch.disc) * _discounted_part(L.base, L.discount_rho, ch, q, i)
        else:
            P = _D(L.base, ch.y[i], q)
            head = _D(L.base, ch.x[i], q) - dt_2alpha_total(P, ch, q.alpha)
        PF = _D(F, ch.y[i], q)
        body = _D(F, ch.x[i], q)
        for xj, yj, zj in zip(ch.x, ch.y, ch.y2):
            body = body - FracPoly.var(yj) * _D(PF, xj, q) - FracPoly.var(zj) * _D(PF, yj, q)
        res.append(head + lam * body - dlam * PF)
    return ELSystem(tuple(res), q, ch, discounted=L.discounted, constrained=True)


@dataclass(frozen=True)
class FVFCoeffs:
    """Velocity Hessian ``g`` and the numerators ``r_k`` with ``M = g^{-1} r``."""

    g: tuple[tuple[FracPoly, ...], ...]
    numerators: tuple[FracPoly, ...]
    order: FracOrder
    chart: Chart

    def g_at(self, point: Mapping[str, float]) -> np.ndarray:
        return np.array([[gij.eval(point) for gij in row] for row in self.g], dtype=float)

    def g_inv_at(self, point: Mapping[str, float]) -> np.ndarray:
        G = self.g_at(point)
        return _solve_regular(G, np.eye(len(G)), point)

    def M_at(self, point: Mapping[str, float]) -> np.ndarray:
        r = np.array([R.eval(point) for R in self.numerators], dtype=float)
        return _solve_regular(self.g_at(point), r, point)

    def is_symmetric(self) -> bool:
        n = len(self.g)
        return all(self.g[i][j] == self.g[j][i] for i in range(n) for j in range(i))


def build_fvf(L: LagrangianSpec) -> FVFCoeffs:
    """``g_ij = D_{y_i} D_{y_j} L`` and ``r_k = D_{x_k} L - d_t^alpha(D_{y_k} L)``.

    A discounted Lagrangian contributes the common factor ``E_alpha(-rho t^alpha)``
    to ``g`` and ``r``; it cancels in ``M`` and is omitted.
    """
    ch, q = L.chart, L.order
    P = [_D(L.base, yi, q) for yi in ch.y]
    g = tuple(tuple(_D(P[j], yi, q) for j in range(ch.n)) for yi in ch.y)
    nums = []
    for k, xk in enumerate(ch.x):
        r = _D(L.base, xk, q) - dt_alpha_total(P[k], ch, q.alpha)
        if L.discounted:
            r = r + L.discount_rho * P[k]
        nums.append(r)
    return FVFCoeffs(g, tuple(nums), q, ch)


def poisson_bracket(f: FracPoly, h: FracPoly, order: FracOrder | float, n: int | Chart) -> FracPoly:
    """``sum_i D_{p_i} f D_{x_i} h - D_{x_i} f D_{p_i} h`` with fractional partials."""
    q = as_order(order, allow_classical=True)
    ch = n if isinstance(n, Chart) else Chart.standard(int(n))
    out = FracPoly()
    for xi, pi in zip(ch.x, ch.p):
        out = out + _D(f, pi, q) * _D(h, xi, q) - _D(f, xi, q) * _D(h, pi, q)
    return out


# Legendre transform


@dataclass(frozen=True)
class _Affine:
    """``p_i = c * y_i^beta + d(x)`` with constant ``c``."""

    beta: Fraction
    c: float
    d: FracPoly


def _affine_form(P: FracPoly, yi: str, others: Sequence[str]) -> _Affine | None:
    if P.variables & set(others):
        return None
    parts = P.split_by(yi)
    powers = [e for e in parts if e != 0]
    if len(powers) != 1:
        return None
    beta = powers[0]
    coef = parts[beta]
    if coef.variables or coef.is_zero:
        return None
    return _Affine(beta, coef.constant_term(), parts.get(Fraction(0), FracPoly()))


@dataclass(frozen=True)
class HamiltonianSpec:
    """Hamiltonian ``H = Gamma(1+alpha) p.y - L`` over ``(t, x, p)``.

    ``H`` is a FracPoly when every momentum is affine in a single power of its
    own velocity with a constant factor and the velocity powers in ``H`` are
    integer multiples of it; otherwise :meth:`evaluate` inverts ``y -> p``
    numerically on ``box``. For a discounted Lagrangian the discount factor
    enters as the variable ``chart.disc`` and ``p`` is the full momentum
    ``E * D_y L1``.
    """

    lagrangian: LagrangianSpec
    momenta: tuple[FracPoly, ...]
    H: FracPoly | None
    box: tuple[float, float] = (1e-12, 1e6)

    @property
    def chart(self) -> Chart:
        return self.lagrangian.chart

    @property
    def order(self) -> FracOrder:
        return self.lagrangian.order

    def context(self, t) -> dict:
        """Extra variables at time ``t`` (the discount factor when present)."""
        L = self.lagrangian
        if not L.discounted:
            return {}
        return {self.chart.disc: ml_discount(L.order, L.discount_rho, t)}

    def velocities(self, point: Mapping[str, float]) -> np.ndarray:
        """Invert ``p = D_y L`` coordinate by coordinate at ``point`` (scalar values)."""
        ch = self.chart
        lo, hi = self.box
        ys = []
        for i, (yi, pi) in enumerate(zip(ch.y, ch.p)):
            Pi = self.momenta[i]
            others = [v for v in ch.y if v != yi]
            if Pi.variables & set(others):
                raise InversionError("momenta coupled across coordinates; per-coordinate inversion impossible")
            base = {k: v for k, v in point.items() if k not in ch.y}

            def gap(y: float) -> float:
                return float(Pi.eval({**base, yi: y})) - float(point[pi])

            dP = frac_partial(Pi, yi, 1)
            samples = np.concatenate([[lo, hi], np.geomspace(max(lo, 1e-300), hi, 34)[1:-1]])
            slopes = np.array([float(dP.eval({**base, yi: s})) for s in samples])
            if not (np.all(slopes > 0) or np.all(slopes < 0)):
                raise InversionError(f"momentum {pi} is not strictly monotone in {yi} on {self.box}")
            fa, fb = gap(lo), gap(hi)
            if fa * fb > 0:
                raise InversionError(f"momentum value {point[pi]} outside the image of the box for {yi}")
            ys.append(optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        return np.array(ys)

    def evaluate(self, point: Mapping[str, float]) -> float:
        if self.H is not None:
            return float(self.H.eval(point))
        y = self.velocities(point)
        ch = self.chart
        G1 = gamma_fn(1.0 + self.order.alpha)
        full = {**point, **dict(zip(ch.y, y))}
        L = self.lagrangian.base.eval(full)
        if self.lagrangian.discounted:
            L = L * point[ch.disc]
        return float(G1 * sum(point[pi] * yi for pi, yi in zip(ch.p, y)) - L)

    __call__ = evaluate


def legendre(L: LagrangianSpec, box: tuple[float, float] = (1e-12, 1e6)) -> HamiltonianSpec:
    """Momenta ``p_i = D_{y_i} L`` and the Hamiltonian, closed form when possible."""
    ch, q = L.chart, L.order
    E = FracPoly.var(ch.disc) if L.discounted else None
    P1 = [_D(L.base, yi, q) for yi in ch.y]
    momenta = tuple(E * P if E is not None else P for P in P1)
    if all(P.is_zero for P in momenta):
        raise InversionError("momenta vanish identically; the Lagrangian is degenerate")
    G1 = gamma_fn(1.0 + q.alpha)
    Lfull = E * L.base if E is not None else L.base
    H = G1 * sum((FracPoly.var(pi) * FracPoly.var(yi) for pi, yi in zip(ch.p, ch.y)), FracPoly()) - Lfull
    for i, yi in enumerate(ch.y):
        form = _affine_form(P1[i], yi, [v for v in ch.y if v != yi])
        if form is None or form.c == 0.0:
            return HamiltonianSpec(L, momenta, None, box)
        # y_i^beta = (p_i / E - d) / c
        target = FracPoly.var(ch.p[i]) * (FracPoly.var(ch.disc, -1) if E is not None else 1.0)
        value = (target - form.d) / form.c
        try:
            H = H.substitute(yi, value, base=form.beta)
        except DomainError:
            return HamiltonianSpec(L, momenta, None, box)
    return HamiltonianSpec(L, momenta, H, box)


# Hamilton checks along a trajectory


def _time_derivative(values: np.ndarray, step: float, order: FracOrder) -> np.ndarray:
    f = SampledFunction(0.0, step, values)
    if order.is_classical:
        return classical_derivative(f).values
    return caputo_left(f, order.alpha).values


def verify_hamilton(traj, H: HamiltonianSpec, skip: int | None = None) -> dict:
    """Residuals of Hamilton's equations and the two bracket identities along ``traj``.

    ``traj`` needs ``x`` and ``p`` channels. Time derivatives come from the
    grid schemes; node 0 (where the fractional scheme is 0 by convention) is
    excluded for fractional orders unless ``skip`` says otherwise. Each entry
    reports the max and mean absolute residual and the max residual relative
    to the max magnitude of the time-derivative side.
    """
    if traj.p is None:
        raise DomainError("trajectory carries no momentum channel")
    if H.H is None:
        raise DomainError("Hamilton verification needs a closed-form Hamiltonian")
    ch, q = H.chart, H.order
    if skip is None:
        skip = 0 if q.is_classical else 1
    h = traj.step
    point = {ch.t: traj.t, **dict(zip(ch.x, traj.x.T)), **dict(zip(ch.p, traj.p.T)), **H.context(traj.t)}
    report: dict[str, dict] = {}

    def record(name: str, lhs: np.ndarray, rhs: np.ndarray) -> None:
        d = np.abs(lhs - rhs)[skip:]
        scale = max(float(np.max(np.abs(lhs[skip:]))), 1e-300)
        report[name] = {
            "max": float(d.max()),
            "mean": float(d.mean()),
            "relative": float(d.max() / scale),
        }

    for i, (xi, pi) in enumerate(zip(ch.x, ch.p)):
        Dp = _time_derivative(traj.p[:, i], h, q)
        Dx = _time_derivative(traj.x[:, i], h, q)
        dHdx = np.broadcast_to(_D(H.H, xi, q).eval(point), traj.t.shape)
        dHdp = np.broadcast_to(_D(H.H, pi, q).eval(point), traj.t.shape)
        bp = np.broadcast_to(poisson_bracket(H.H, FracPoly.var(pi), q, ch).eval(point), traj.t.shape)
        bx = np.broadcast_to(poisson_bracket(H.H, FracPoly.var(xi), q, ch).eval(point), traj.t.shape)
        suffix = "" if ch.n == 1 else f"_{i + 1}"
        record(f"momentum_equation{suffix}", Dp, -dHdx)
        record(f"position_equation{suffix}", Dx, dHdp)
        record(f"bracket_momentum{suffix}", Dp, bp)
        record(f"bracket_position{suffix}", Dx, bx)
    return report


def el_trajectory_residual(system: ELSystem, traj, context: Callable[[np.ndarray], dict] | None = None, skip: int = 1):
    """Residuals of an Euler-Lagrange system along ``traj``.

    ``y`` comes from the ``v`` channel and ``y2`` from the grid derivative of
    ``y``; returns the absolute residual array of shape ``(N - skip, n)``.
    """
    ch, q = system.chart, system.order
    y = traj.y
    y2 = np.column_stack([_time_derivative(y[:, i], traj.step, q) for i in range(ch.n)])
    point = {ch.t: traj.t, **dict(zip(ch.x, traj.x.T)), **dict(zip(ch.y, y.T)), **dict(zip(ch.y2, y2.T))}
    if context is not None:
        point.update(context(traj.t))
    vals = np.column_stack([np.broadcast_to(R.eval(point), traj.t.shape) for R in system.residuals])
    return np.abs(vals[skip:])
