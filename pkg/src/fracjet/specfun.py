"""Scalar special functions: the gamma function and the one-parameter
Mittag-Leffler function :math:`E_\\alpha(z) = \\sum_k z^k / \\Gamma(1 + \\alpha k)`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np
from scipy import integrate

from fracjet.errors import DomainError, PoleError

#: Largest argument for which :func:`gamma_fn` is finite in double precision.
GAMMA_OVERFLOW = 171.62

#: Documented evaluation domain of :func:`mittag_leffler`, ``|z| <= ML_DOMAIN``.
ML_DOMAIN = 50.0

# largest series term magnitude for which plain (compensated) summation of an
# alternating series stays within the 1e-10 absolute budget
_SERIES_PEAK_LIMIT = 1.0e4
_TERM_RTOL = 1.0e-16


@dataclass(frozen=True)
class FracOrder:
    """A fractional order :math:`0 < \\alpha < 1`.

    The classical limit :math:`\\alpha = 1` is not a fractional order and is
    rejected by the constructor; use :meth:`FracOrder.classical` where a
    routine explicitly supports the integer-order reference case.
    """

    alpha: float

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or not 0.0 < alpha < 1.0:
            raise DomainError(f"fractional order must satisfy 0 < alpha < 1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def classical(cls) -> FracOrder:
        """The integer-order limit ``alpha = 1``."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "alpha", 1.0)
        return obj

    @property
    def is_classical(self) -> bool:
        return self.alpha == 1.0

    @property
    def exact(self) -> Fraction:
        """The order as an exact decimal fraction (``0.3 -> 3/10``)."""
        return Fraction(repr(self.alpha))

    def __float__(self) -> float:
        return self.alpha


OrderLike = Union[float, FracOrder]


def as_order(alpha: OrderLike, *, allow_classical: bool = False) -> FracOrder:
    """Coerce ``alpha`` to a :class:`FracOrder`, optionally admitting 1."""
    if isinstance(alpha, FracOrder):
        if alpha.is_classical and not allow_classical:
            raise DomainError("the classical order alpha = 1 is not accepted here")
        return alpha
    if allow_classical and float(alpha) == 1.0:
        return FracOrder.classical()
    return FracOrder(float(alpha))


def gamma_fn(z: float) -> float:
    """Euler's gamma function on the real line.

    Raises :class:`PoleError` at zero and the negative integers and
    :class:`OverflowError` above :data:`GAMMA_OVERFLOW`.
    """
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"gamma argument must be finite, got {z}")
    if z <= 0.0 and z == math.floor(z):
        raise PoleError(f"gamma has a pole at {z}")
    if z > GAMMA_OVERFLOW:
        raise OverflowError(f"gamma({z}) overflows double precision")
    return math.gamma(z)


def gamma_ratio(a: float, b: float) -> float:
    """:math:`\\Gamma(a) / \\Gamma(b)`, taking ``1/Gamma(b) = 0`` at the poles of ``b``."""
    b = float(b)
    if b <= 0.0 and b == math.floor(b):
        gamma_fn(a)
        return 0.0
    if a > 170.0 and b > 170.0:
        return math.exp(math.lgamma(a) - math.lgamma(b))
    return gamma_fn(a) / gamma_fn(b)


def _series_term(alpha: float, z: float, k: int) -> float:
    arg = 1.0 + alpha * k
    if arg < 170.0 and k * math.log(abs(z)) < 700.0:
        return z**k / math.gamma(arg)
    sign = -1.0 if (z < 0 and k % 2) else 1.0
    return sign * math.exp(k * math.log(abs(z)) - math.lgamma(arg))


def _log_peak(alpha: float, x: float) -> float:
    """log of the largest term magnitude of the series at ``|z| = x``."""
    # the series behaves like exp(x**(1/alpha)); only small cases need the exact scan
    scale = x ** (1.0 / alpha)
    if scale > 50.0:
        return scale
    kmax = int(scale / alpha) + 3
    return max(k * math.log(x) - math.lgamma(1.0 + alpha * k) for k in range(kmax + 1))


def _ml_series(alpha: float, z: float) -> float:
    terms = []
    k = 0
    biggest = 0.0
    while True:
        term = _series_term(alpha, z, k)
        terms.append(term)
        biggest = max(biggest, abs(term))
        # stop once the terms are decreasing and negligible against the sum scale
        if k > 2 and alpha * k + 1 > abs(z) ** (1.0 / alpha) and abs(term) <= _TERM_RTOL * max(
            biggest, 1e-300
        ) * 1e-2:
            break
        k += 1
        if k > 200_000:
            raise DomainError(f"Mittag-Leffler series did not converge at z={z}")
    return math.fsum(terms)


def _ml_negative_integral(alpha: float, x: float) -> float:
    """``E_alpha(-x)`` for ``x > 0`` from its Laplace-type integral.

    With ``s = x**(1/alpha)`` and the substitution ``r = u**(1/alpha)``,

        E_alpha(-x) = sin(alpha pi)/(alpha pi)
                      * int_0^inf exp(-s u^(1/alpha)) / (u^2 + 2 u cos(alpha pi) + 1) du,

    whose integrand is smooth and nonnegative.
    """
    s = x ** (1.0 / alpha)
    c = math.cos(alpha * math.pi)
    pref = math.sin(alpha * math.pi) / (alpha * math.pi)

    def f(u: float) -> float:
        return math.exp(-s * u ** (1.0 / alpha)) / (u * u + 2.0 * u * c + 1.0)

    # beyond u_cut the exponential factor is below 1e-32
    u_cut = (75.0 / s) ** alpha
    # near alpha = 1 the denominator is a narrow Lorentzian centred at u = 1
    width = max(math.pi * (1.0 - alpha), 1e-8)
    nodes = [0.0] + sorted(b for b in {1.0 - width, 1.0, 1.0 + width} if 0.0 < b < u_cut) + [u_cut]
    total = math.fsum(
        integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
        for lo, hi in zip(nodes[:-1], nodes[1:])
    )
    tail, _ = integrate.quad(f, u_cut, np.inf, epsabs=1e-16, limit=200)
    return pref * (total + tail)


def mittag_leffler(alpha: OrderLike, z: float) -> float:
    """One-parameter Mittag-Leffler function :math:`E_\\alpha(z)` for real ``z``.

    ``alpha`` may be any order in ``(0, 1]``; ``alpha = 1`` returns ``exp(z)``.
    The evaluation domain is ``|z| <= 50``. For ``z < 0`` the alternating series
    is summed with :func:`math.fsum` while its largest term stays moderate, and
    the integral representation is used otherwise. Positive arguments whose
    value exceeds double range raise :class:`OverflowError`.
    """
    order = as_order(alpha, allow_classical=True)
    a = order.alpha
    z = float(z)
    if not math.isfinite(z) or abs(z) > ML_DOMAIN:
        raise DomainError(f"Mittag-Leffler argument must satisfy |z| <= {ML_DOMAIN}, got {z}")
    if z == 0.0:
        return 1.0
    if a == 1.0:
        return math.exp(z)
    if z > 0.0:
        if z ** (1.0 / a) > 700.0:
            raise OverflowError(f"E_{a}({z}) exceeds double precision range")
        return _ml_series(a, z)
    if _log_peak(a, -z) <= math.log(_SERIES_PEAK_LIMIT):
        return _ml_series(a, z)
    return _ml_negative_integral(a, -z)


def ml_discount(alpha: OrderLike, rho: float, t):
    """Fractional discount factor :math:`E_\\alpha(-\\rho t^\\alpha)`.

    Accepts a scalar or an array of times and returns the same shape.
    """
    order = as_order(alpha, allow_classical=True)
    if rho < 0:
        raise DomainError(f"discount rate must be nonnegative, got {rho}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("discount factor needs t >= 0")
    flat = [mittag_leffler(order, -rho * ti**order.alpha) for ti in t_arr.ravel()]
    out = np.array(flat, dtype=float).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out
