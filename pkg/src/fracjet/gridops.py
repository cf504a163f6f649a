"""Caputo derivatives of functions sampled on uniform grids.

The left derivative of order :math:`0 < \\alpha < 1` uses the L1 scheme: the
sampled function is reconstructed piecewise linearly and the kernel
:math:`(t - s)^{-\\alpha}` is integrated exactly on every cell, giving

.. math::

    D^\\alpha f(t_n) \\approx \\frac{h^{-\\alpha}}{\\Gamma(2 - \\alpha)}
        \\sum_{j=0}^{n-1} b_{n-1-j} (f_{j+1} - f_j),
    \\qquad b_k = (k + 1)^{1-\\alpha} - k^{1-\\alpha}.

Orders in :math:`(1, 2)` apply the same scheme of order :math:`\\alpha - 1` to
a second-order finite-difference derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fracjet.errors import DomainError
from fracjet.specfun import FracOrder, gamma_fn

MIN_POINTS = 3


@dataclass(frozen=True)
class SampledFunction:
    """Values ``x(a), x(a + h), ...`` of a scalar function on a uniform grid."""

    start: float
    step: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DomainError("sampled values must be one-dimensional")
        if not self.step > 0:
            raise DomainError(f"grid step must be positive, got {self.step}")
        if values.size < MIN_POINTS:
            raise DomainError(f"need at least {MIN_POINTS} grid points, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> SampledFunction:
        """Sample ``f`` on ``n`` uniform intervals of ``[a, b]`` (``n + 1`` nodes)."""
        t = np.linspace(a, b, n + 1)
        return cls(a, (b - a) / n, np.asarray(f(t), dtype=float))

    @property
    def grid(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.values.size)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.values.size - 1)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MultiGrid:
    """Tensor-product grid with a dense value array, one array axis per coordinate."""

    starts: tuple[float, ...]
    steps: tuple[float, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        starts = tuple(float(s) for s in self.starts)
        steps = tuple(float(h) for h in self.steps)
        if not (len(starts) == len(steps) == values.ndim):
            raise DomainError("starts, steps and value dimensions disagree")
        if any(not h > 0 for h in steps):
            raise DomainError("all grid steps must be positive")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "values", values)

    @property
    def counts(self) -> tuple[int, ...]:
        return self.values.shape

    def axis_grid(self, axis: int) -> np.ndarray:
        return self.starts[axis] + self.steps[axis] * np.arange(self.values.shape[axis])

    @classmethod
    def from_callable(cls, f: Callable[..., np.ndarray], axes: Sequence[tuple[float, float, int]]) -> MultiGrid:
        """Tabulate ``f(x1, x2, ...)`` on ``(start, stop, intervals)`` axes."""
        grids = [np.linspace(a, b, n + 1) for a, b, n in axes]
        mesh = np.meshgrid(*grids, indexing="ij")
        return cls(
            tuple(a for a, _, _ in axes),
            tuple((b - a) / n for a, b, n in axes),
            np.asarray(f(*mesh), dtype=float) * np.ones(mesh[0].shape),
        )


def _check_order(order: float) -> float:
    order = float(order)
    if not math.isfinite(order) or order <= 0.0 or order >= 2.0:
        raise DomainError(f"grid Caputo order must lie in (0, 1) or (1, 2), got {order}")
    if order == 1.0:
        raise DomainError("integer order 1 is not a fractional order; use classical_derivative")
    return order


def l1_weights(order: float, n: int) -> np.ndarray:
    """L1 weights ``b_k = (k+1)^(1-order) - k^(1-order)`` for ``k < n``."""
    k = np.arange(n + 1, dtype=float)
    p = k ** (1.0 - order)
    return np.diff(p)


def _l1_last_axis(values: np.ndarray, order: float, step: float) -> np.ndarray:
    """L1 scheme along the last axis of ``values`` (lower limit at index 0)."""
    n = values.shape[-1]
    diffs = np.diff(values, axis=-1)
    b = l1_weights(order, n - 1)
    scale = step ** (-order) / gamma_fn(2.0 - order)
    out = np.zeros_like(values)
    # oldest-first fixed summation order per node
    for i in range(1, n):
        out[..., i] = diffs[..., :i] @ b[i - 1 :: -1]
    return scale * out


def classical_derivative(f: SampledFunction) -> SampledFunction:
    """Second-order finite-difference first derivative (one-sided at the ends)."""
    return SampledFunction(f.start, f.step, np.gradient(f.values, f.step, edge_order=2))


def caputo_left(f: SampledFunction, order: float | FracOrder) -> SampledFunction:
    """Left Caputo derivative :math:`{}_aD_t^\\alpha f` at every grid node.

    The value at the first node is 0 by convention. Orders in ``(1, 2)`` are
    computed as the order ``alpha - 1`` derivative of a second-order
    finite-difference :math:`f'`.
    """
    order = _check_order(float(order))
    if order > 1.0:
        f = classical_derivative(f)
        order -= 1.0
    return SampledFunction(f.start, f.step, _l1_last_axis(f.values, order, f.step))


def caputo_right(f: SampledFunction, order: float | FracOrder) -> SampledFunction:
    """Right Caputo derivative :math:`{}_tD_b^\\alpha f`, vanishing at the last node.

    Computed by reflection ``t -> a + b - t`` so that
    ``caputo_right(f)(t) == caputo_left(f o reflect)(a + b - t)`` exactly.
    """
    order = _check_order(float(order))
    if order > 1.0:
        raise DomainError("right Caputo derivative supports orders in (0, 1) only")
    reflected = SampledFunction(f.start, f.step, f.values[::-1])
    return SampledFunction(f.start, f.step, caputo_left(reflected, order).values[::-1].copy())


def caputo_partial(f: MultiGrid, axis: int, order: float | FracOrder) -> MultiGrid:
    """Fractional partial derivative along ``axis`` with the other coordinates frozen.

    The lower limit on that axis is the grid start.
    """
    order = _check_order(float(order))
    if not -f.values.ndim <= axis < f.values.ndim:
        raise DomainError(f"axis {axis} out of range for a {f.values.ndim}-d grid")
    axis %= f.values.ndim
    if f.values.shape[axis] < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} points along axis {axis}")
    moved = np.moveaxis(f.values, axis, -1)
    h = f.steps[axis]
    if order > 1.0:
        moved = np.gradient(moved, h, axis=-1, edge_order=2)
        order -= 1.0
    out = np.moveaxis(_l1_last_axis(moved, order, h), -1, axis)
    return MultiGrid(f.starts, f.steps, out)
