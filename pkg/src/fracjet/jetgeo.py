"""Pointwise geometry of the order-alpha jet bundle.

Vectors are coefficient arrays in the operator basis
``(D_t, D_{x_1}, ..., D_{x_n}, D_{y_1}, ..., D_{y_n})`` (all of order alpha);
1-forms are coefficient arrays in the coframe ``d(t)^a, d(x_i)^a, d(y_i)^a``.
The coframe pairs with the basis through ``d(u)^a (D_v) = Gamma(1 + alpha) delta_uv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from fracjet.errors import DomainError
from fracjet.fracpoly import Chart, FracPoly, frac_partial
from fracjet.specfun import FracOrder, as_order, gamma_fn
from fracjet.variational import LagrangianSpec, build_fvf

FVF_TOL = 1e-12


@dataclass(frozen=True)
class JetPoint:
    t: float
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self) -> None:
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        y = tuple(float(v) for v in np.atleast_1d(self.y))
        if len(x) != len(y) or not x:
            raise DomainError("x and y must be nonempty and of equal length")
        if not all(math.isfinite(v) for v in (self.t, *x, *y)):
            raise DomainError("jet coordinates must be finite")
        if self.t < 0:
            raise DomainError(f"t must be nonnegative, got {self.t}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)

    def as_point(self, chart: Chart) -> dict[str, float]:
        return {chart.t: self.t, **dict(zip(chart.x, self.x)), **dict(zip(chart.y, self.y))}


@dataclass(frozen=True)
class TangentRep:
    """Vector ``ct D_t + cx_i D_{x_i} + cy_i D_{y_i}``."""

    ct: float
    cx: tuple[float, ...]
    cy: tuple[float, ...]

    def __post_init__(self) -> None:
        cx = tuple(float(v) for v in np.atleast_1d(self.cx))
        cy = tuple(float(v) for v in np.atleast_1d(self.cy))
        if len(cx) != len(cy):
            raise DomainError("cx and cy must have equal length")
        if not all(math.isfinite(v) for v in (self.ct, *cx, *cy)):
            raise DomainError("tangent coefficients must be finite")
        object.__setattr__(self, "ct", float(self.ct))
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> TangentRep:
        a = np.asarray(a, dtype=float)
        n = (a.size - 1) // 2
        return cls(a[0], a[1 : n + 1], a[n + 1 :])

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.ct], self.cx, self.cy])


@dataclass(frozen=True)
class CanonicalEval:
    """Coefficients of ``omega = A_i dt^dx_i + B_i dt^dy_i + A2_ij dx_i^dx_j + B2_ij dx_i^dy_j``."""

    A: np.ndarray
    B: np.ndarray
    A2: np.ndarray
    B2: np.ndarray


@dataclass(frozen=True)
class CoordinateChange:
    """``xbar_i = scale[perm[i]] * x[perm[i]]`` with positive scales."""

    scale: tuple[float, ...]
    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        scale = tuple(float(c) for c in self.scale)
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(scale))):
            raise DomainError(f"{perm} is not a permutation of 0..{len(scale) - 1}")
        if not all(c > 0 and math.isfinite(c) for c in scale):
            raise DomainError("coordinate scalings must be positive and finite")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int) -> CoordinateChange:
        return cls((1.0,) * n, tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.scale)

    def inverse(self) -> CoordinateChange:
        inv = [0] * self.n
        for i, s in enumerate(self.perm):
            inv[s] = i
        return CoordinateChange(tuple(1.0 / self.scale[self.perm[k]] for k in range(self.n)), tuple(inv))


def _coframe_names(n: int) -> tuple[str, list[str], list[str]]:
    ch = Chart.standard(n)
    return ch.t, list(ch.x), list(ch.y)


def pairing_table(order: FracOrder | float, n: int) -> np.ndarray:
    """``P[u, v] = (1/Gamma(1+alpha)) D_v^alpha (u^alpha)`` over ``(t, x_i, y_i)``.

    Each entry is obtained with the power rule and must be a constant.
    """
    q = as_order(order, allow_classical=True)
    t, xs, ys = _coframe_names(n)
    names = [t, *xs, *ys]
    G1 = gamma_fn(1.0 + q.alpha)
    table = np.zeros((len(names), len(names)))
    for r, u in enumerate(names):
        form = FracPoly.var(u, q.exact, 1.0 / G1)
        for c, v in enumerate(names):
            val = frac_partial(form, v, q)
            if val.variables:
                raise DomainError(f"pairing of d({u})^a with D_{v} is not constant")
            table[r, c] = val.constant_term()
    return table


@dataclass(frozen=True)
class FVFCheck:
    is_fvf: bool
    defects: np.ndarray


def check_fvf(v: TangentRep, p: JetPoint, order: FracOrder | float) -> FVFCheck:
    """Defects of the defining conditions: ``(1/G) d(t)^a(v) - 1`` and ``theta^i(v)``."""
    as_order(order, allow_classical=True)
    if len(v.cx) != p.n:
        raise DomainError("vector and point dimensions differ")
    y = np.asarray(p.y)
    defects = np.concatenate([[v.ct - 1.0], np.asarray(v.cx) - y * v.ct])
    return FVFCheck(bool(np.all(np.abs(defects) <= FVF_TOL)), defects)


def apply_structures(v: TangentRep, p: JetPoint, order: FracOrder | float) -> tuple[TangentRep, TangentRep, TangentRep]:
    """``(theta1(v), theta2(v), S(v))`` as tangent vectors at ``p``."""
    q = as_order(order, allow_classical=True)
    G1 = gamma_fn(1.0 + q.alpha)
    y = np.asarray(p.y)
    zeros = np.zeros(p.n)
    dt = G1 * v.ct
    theta = np.asarray(v.cx) - y * v.ct
    return (
        TangentRep(dt, dt * y, zeros),
        TangentRep(0.0, theta, zeros),
        TangentRep(0.0, zeros, theta),
    )


def vertical_basis(n: int, i: int) -> TangentRep:
    """``V_i = D_{y_i}``."""
    cy = np.zeros(n)
    cy[i] = 1.0
    return TangentRep(0.0, np.zeros(n), cy)


FormVariant = Literal["printed", "derived"]


def cartan_coeffs(L: LagrangianSpec, p: JetPoint, form: FormVariant = "printed") -> CanonicalEval:
    """Cartan 2-form coefficients at ``p``.

    ``"printed"`` uses the closed-form coefficient list (with ``A2_ij`` read as
    ``D_{x_i} D_{y_j} L``). ``"derived"`` differentiates the Cartan 1-form
    ``(L - y_i P_i / G) d(t)^a + (P_i / G) d(x_i)^a``, ``P_i = D_{y_i} L``,
    term by term, treating ``d(d(u)^a) = 0``.
    """
    if L.discounted:
        raise DomainError("Cartan forms are evaluated for undiscounted Lagrangians")
    if form not in ("printed", "derived"):
        raise DomainError(f"unknown form variant {form!r}")
    ch, q = L.chart, L.order
    n = ch.n
    if p.n != n:
        raise DomainError("point dimension differs from the Lagrangian's")
    a = q.alpha if q.is_classical else q
    D = lambda P, v: frac_partial(P, v, a)  # noqa: E731
    G1 = gamma_fn(1.0 + q.alpha)
    pt = p.as_point(ch)
    ev = lambda P: float(P.eval(pt)) if P.variables else P.constant_term()  # noqa: E731

    P = [D(L.base, yi) for yi in ch.y]
    yP = sum((FracPoly.var(yj) * Pj for yj, Pj in zip(ch.y, P)), FracPoly())
    A = np.array(
        [
            ev(D(P[i], ch.t)) / G1
            + sum(pt[ch.y[j]] * ev(D(P[j], ch.x[i])) for j in range(n)) / G1
            - ev(D(L.base, ch.x[i]))
            for i in range(n)
        ]
    )
    B = np.array([ev(D(yP, ch.y[i])) / G1 for i in range(n)])
    A2 = np.array([[ev(D(P[j], ch.x[i])) for j in range(n)] for i in range(n)])
    B2 = np.array([[-ev(D(P[i], ch.y[j])) for j in range(n)] for i in range(n)])
    if form == "derived":
        B = B - np.array([ev(Pi) for Pi in P])
        A2 = A2 / G1
        B2 = B2 / G1
    return CanonicalEval(A, B, A2, B2)


def contract(omega: CanonicalEval, v: TangentRep, order: FracOrder | float) -> np.ndarray:
    """Coefficients of ``i_v omega`` in the coframe ``(d(t)^a, d(x_k)^a, d(y_k)^a)``."""
    q = as_order(order, allow_classical=True)
    G1 = gamma_fn(1.0 + q.alpha)
    ct, cx, cy = v.ct, np.asarray(v.cx), np.asarray(v.cy)
    A, B, A2, B2 = omega.A, omega.B, omega.A2, omega.B2
    # i_v (u ^ w) = u(v) w - w(v) u
    dt = -(A @ cx) - (B @ cy)
    dx = ct * A + (A2.T - A2) @ cx - B2 @ cy
    dy = ct * B + B2.T @ cx
    return G1 * np.concatenate([[dt], dx, dy])


def interior_product_residual(
    L: LagrangianSpec,
    p: JetPoint,
    form: FormVariant = "derived",
    perturbation: float = 0.0,
) -> float:
    """Max-norm of ``i_Gamma omega_L`` where ``Gamma = D_t + y D_x + M D_y``.

    ``M`` comes from :func:`fracjet.variational.build_fvf`; ``perturbation``
    is added to every ``M`` component (a negative control).
    """
    omega = cartan_coeffs(L, p, form)
    if not any(np.any(arr) for arr in (omega.A, omega.B, omega.A2, omega.B2)):
        return 0.0
    fvf = build_fvf(L)
    M = fvf.M_at(p.as_point(L.chart)) + perturbation
    gamma = TangentRep(1.0, p.y, M)
    return float(np.max(np.abs(contract(omega, gamma, L.order))))


def transform_jet(change: CoordinateChange, p: JetPoint, order: FracOrder | float) -> JetPoint:
    """Map a jet point to the chart ``xbar = change(x)``.

    ``ybar^i = J^i_j y^j`` with ``J^i_j = (1/Gamma(1+alpha)) D_{xbar_i}^alpha (x^j)^alpha``
    and ``x^j`` written as a monomial in ``xbar``.
    """
    q = as_order(order, allow_classical=True)
    if change.n != p.n:
        raise DomainError("change and point dimensions differ")
    x = np.asarray(p.x)
    if np.any(x <= 0):
        raise DomainError("coordinate changes act on the positive orthant only")
    n = p.n
    G1 = gamma_fn(1.0 + q.alpha)
    a = q.alpha if q.is_classical else q
    xbar = np.array([change.scale[s] * x[s] for s in change.perm])
    J = np.zeros((n, n))
    for i, s in enumerate(change.perm):
        # x^s = xbar^i / c_s, so (x^s)^alpha = c_s^(-alpha) (xbar^i)^alpha
        xs_alpha = FracPoly.var("xbar", q.exact, change.scale[s] ** (-q.alpha))
        J[i, s] = frac_partial(xs_alpha, "xbar", a).constant_term() / G1
    return JetPoint(p.t, tuple(xbar), tuple(J @ np.asarray(p.y)))


def random_points(
    n: int,
    count: int,
    seed: int,
    low: float = 0.1,
    high: float = 2.0,
) -> list[JetPoint]:
    """Seeded uniform points of the open positive orthant box ``[low, high]``."""
    rng = np.random.default_rng(seed)
    vals = rng.uniform(low, high, size=(count, 2 * n + 1))
    return [JetPoint(v[0], v[1 : n + 1], v[n + 1 :]) for v in vals]


def report(check: str, residuals: Sequence[float], tol: float) -> dict:
    """JSON-ready ``{check, points, max_residual, mean_residual, pass}``."""
    r = np.asarray(residuals, dtype=float)
    worst = float(r.max()) if r.size else 0.0
    return {
        "check": check,
        "points": int(r.size),
        "max_residual": worst,
        "mean_residual": float(r.mean()) if r.size else 0.0,
        "pass": bool(worst <= tol),
    }
