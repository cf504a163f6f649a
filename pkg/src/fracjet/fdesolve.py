"""Fixed-step solver for Caputo initial value problems ``D^alpha y = f(t, y)``.

The scheme is the fractional Adams-Bashforth-Moulton predictor-corrector
(product rectangle predictor, product trapezoid corrector, one corrector pass)
with the full history sum. It reduces to the trapezoidal PECE method when
``alpha = 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO, Union

import numpy as np

from fracjet.errors import DomainError, IntegrationError
from fracjet.fracpoly import FracPoly
from fracjet.specfun import FracOrder, as_order, gamma_fn

MAX_STEPS = 10**6

Rhs = Callable[[float, np.ndarray], np.ndarray]
RhsSpec = Union[Rhs, Sequence[FracPoly]]


@dataclass
class Trajectory:
    """Uniform-grid solution with named channels.

    ``x`` and ``v`` have shape ``(N, n)``; ``v`` holds ``D^alpha x``, so the
    normalized fractional velocity is ``y = v / Gamma(1 + alpha)``. ``p`` and
    ``lam`` are optional momentum and multiplier channels; ``extra`` carries
    any further named series of length ``N``.
    """

    t: np.ndarray
    order: float
    x: np.ndarray
    v: np.ndarray | None = None
    p: np.ndarray | None = None
    lam: np.ndarray | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float).T).T
        N = self.t.size
        for name in ("x", "v", "p"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.atleast_2d(np.asarray(arr, dtype=float).T).T
                if arr.shape[0] != N:
                    raise DomainError(f"channel {name} has {arr.shape[0]} rows, grid has {N}")
                setattr(self, name, arr)
        if self.lam is not None:
            self.lam = np.asarray(self.lam, dtype=float).reshape(N)
        for key, arr in self.extra.items():
            if np.shape(arr) != (N,):
                raise DomainError(f"extra channel {key} must have length {N}")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def y(self) -> np.ndarray:
        """Normalized fractional velocity ``D^alpha x / Gamma(1 + alpha)``."""
        if self.v is None:
            raise DomainError("trajectory has no velocity channel")
        return self.v / gamma_fn(1.0 + self.order)

    def header(self) -> list[str]:
        cols = ["t"] + [f"x_{i + 1}" for i in range(self.n)]
        if self.v is not None:
            cols += [f"v_{i + 1}" for i in range(self.v.shape[1])]
        if self.p is not None:
            cols += [f"p_{i + 1}" for i in range(self.p.shape[1])]
        if self.lam is not None:
            cols.append("lambda")
        return cols + list(self.extra)

    def table(self) -> np.ndarray:
        blocks = [self.t[:, None], self.x]
        for arr in (self.v, self.p):
            if arr is not None:
                blocks.append(arr)
        if self.lam is not None:
            blocks.append(self.lam[:, None])
        blocks += [np.asarray(a)[:, None] for a in self.extra.values()]
        return np.hstack(blocks)

    def write_csv(self, target: str | Path | TextIO) -> None:
        """One row per node, 17 significant digits."""
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.table():
            writer.writerow([f"{v:.17g}" for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def as_rhs(rhs: RhsSpec, names: Sequence[str] | None = None, time: str = "t") -> Rhs:
    """Turn a right-hand side spec into ``f(t, y) -> array``.

    A sequence of :class:`FracPoly` is evaluated with ``time`` bound to ``t``
    and ``names[i]`` bound to ``y[i]``.
    """
    if callable(rhs):
        return rhs
    polys = list(rhs)
    if names is None:
        raise DomainError("polynomial right-hand sides need the state variable names")
    if len(names) != len(polys):
        raise DomainError(f"{len(polys)} right-hand sides for {len(names)} state variables")

    def f(t: float, y: np.ndarray) -> np.ndarray:
        point = {time: t, **{name: yi for name, yi in zip(names, y)}}
        return np.array([P.eval(point) for P in polys], dtype=float)

    return f


def _validate_grid(horizon: float, step: float) -> int:
    if not step > 0 or not math.isfinite(step):
        raise DomainError(f"step must be positive, got {step}")
    if not horizon > 0 or not math.isfinite(horizon):
        raise DomainError(f"horizon must be positive, got {horizon}")
    n = horizon / step
    steps = int(round(n))
    if abs(n - steps) > 1e-9 * max(1.0, n):
        raise DomainError(f"horizon {horizon} is not a whole number of steps {step}")
    if steps > MAX_STEPS:
        raise DomainError(f"{steps} steps exceed the limit {MAX_STEPS}")
    return steps


def abm_integrate(
    alpha: float,
    f: Rhs,
    y0: np.ndarray,
    steps: int,
    h: float,
    guard: Callable[[float, np.ndarray], str | None] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Core predictor-corrector loop; returns ``(t, Y, F)`` with ``F = f(t, Y)``."""
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    d = y0.size
    t = h * np.arange(steps + 1)
    Y = np.empty((steps + 1, d))
    F = np.empty((steps + 1, d))
    Y[0] = y0

    def call(i: int, y: np.ndarray) -> np.ndarray:
        try:
            val = np.asarray(f(t[i], y), dtype=float).reshape(-1)
        except DomainError as exc:
            if i == 0:
                raise
            raise IntegrationError(f"{exc} at step {i}, t={t[i]:.17g}", i, float(t[i])) from exc
        if val.shape != (d,):
            raise DomainError(f"right-hand side returned shape {val.shape}, expected ({d},)")
        if not np.all(np.isfinite(val)):
            raise IntegrationError(f"non-finite right-hand side at step {i}, t={t[i]:.17g}", i, float(t[i]))
        return val

    F[0] = call(0, y0)
    k = np.arange(steps + 2, dtype=float)
    ka = k**alpha
    ka1 = k ** (alpha + 1.0)
    B = ka[1:] - ka[:-1]  # B[m] = (m+1)^a - m^a
    A = ka1[2:] + ka1[:-2] - 2.0 * ka1[1:-1]  # A[m] = (m+2)^(a+1) + m^(a+1) - 2(m+1)^(a+1)
    cp = h**alpha / gamma_fn(alpha + 1.0)
    cc = h**alpha / gamma_fn(alpha + 2.0)
    for n in range(steps):
        pred = y0 + cp * (B[n::-1] @ F[: n + 1])
        a0 = n ** (alpha + 1.0) - (n - alpha) * (n + 1.0) ** alpha
        hist = a0 * F[0]
        if n > 0:
            hist = hist + A[n - 1 :: -1][:n] @ F[1 : n + 1]
        fp = call(n + 1, pred)
        Y[n + 1] = y0 + cc * (fp + hist)
        if not np.all(np.isfinite(Y[n + 1])):
            raise IntegrationError(f"non-finite state at step {n + 1}", n + 1, float(t[n + 1]))
        if guard is not None:
            msg = guard(t[n + 1], Y[n + 1])
            if msg:
                raise IntegrationError(f"{msg} at step {n + 1}, t={t[n + 1]:.17g}", n + 1, float(t[n + 1]))
        F[n + 1] = call(n + 1, Y[n + 1])
    return t, Y, F


def solve_alpha_system(
    order: float | FracOrder,
    rhs: RhsSpec,
    y0: Sequence[float],
    horizon: float,
    step: float,
    names: Sequence[str] | None = None,
    guard: Callable[[float, np.ndarray], str | None] | None = None,
) -> Trajectory:
    """Solve ``D^alpha y = f(t, y)``, ``y(0) = y0`` on ``[0, horizon]``.

    ``order`` may be 1 for the classical reference case. The returned
    trajectory stores ``y`` in ``x`` and ``f(t, y)`` (that is, ``D^alpha y``) in ``v``.
    """
    alpha = as_order(order, allow_classical=True).alpha
    steps = _validate_grid(horizon, step)
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    f = as_rhs(rhs, names)
    t, Y, F = abm_integrate(alpha, f, y0, steps, step, guard)
    return Trajectory(t, alpha, Y, F, names=tuple(names) if names is not None else None)


def solve_fvf(
    order: float | FracOrder,
    F: RhsSpec,
    x0: Sequence[float],
    v0: Sequence[float] | None,
    horizon: float,
    step: float,
    names: Sequence[str] | None = None,
    guard: Callable[[float, np.ndarray], str | None] | None = None,
) -> Trajectory:
    """Integrate ``D^alpha D^alpha x = F(t, x, v)`` with ``v = D^alpha x``.

    The second-order system is augmented to ``D^alpha x = v``,
    ``D^alpha v = F(t, x, v)``; ``D^{2 alpha}`` is thereby read as the
    composition of two order-``alpha`` derivatives. Polynomial ``F`` is
    evaluated over ``names`` (``n`` position names followed by ``n`` velocity
    names). ``v0`` defaults to zero.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n = x0.size
    v0 = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float).reshape(-1)
    if v0.size != n:
        raise DomainError("x0 and v0 must have the same length")
    force = as_rhs(F, names)

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        x, v = z[:n], z[n:]
        return np.concatenate([v, np.asarray(force(t, z), dtype=float).reshape(-1)])

    traj = solve_alpha_system(order, rhs, np.concatenate([x0, v0]), horizon, step, guard=guard)
    return Trajectory(traj.t, traj.order, traj.x[:, :n], traj.x[:, n:], names=tuple(names[:n]) if names else None)
