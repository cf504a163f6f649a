"""Exact algebra of fractional polynomials.

A :class:`FracPoly` is a finite sum of monomials ``c * v1^e1 * v2^e2 ...`` with
real coefficients and exact rational exponents. Exponents are stored as
:class:`fractions.Fraction`, and the order ``alpha`` enters as its exact
decimal fraction (``0.3 -> 3/10``), so sums such as ``alpha + alpha + alpha``
and ``0.9`` compare equal and lattice exponents ``m + k alpha`` never drift.

Fractional partial derivatives act termwise by the Caputo power rule

    D_v^alpha v^g = Gamma(1 + g) / Gamma(1 + g - alpha) v^(g - alpha),   g > 0,

with terms free of ``v`` mapped to zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

from fracjet.errors import DomainError, PoleError
from fracjet.specfun import FracOrder, gamma_fn, gamma_ratio

Exponent = Union[int, float, str, Fraction]
Mono = tuple  # tuple[tuple[str, Fraction], ...], sorted by variable name

#: Name reserved for the order inside exponent expressions of the text grammar.
ORDER_SYMBOL = "a"


def exact(value: Exponent | FracOrder) -> Fraction:
    """Exact rational form of an exponent or order; floats go through ``repr``."""
    if isinstance(value, FracOrder):
        return value.exact
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"exponent must be finite, got {value}")
    return Fraction(repr(value))


def _mono(exponents: Mapping[str, Exponent]) -> Mono:
    items = []
    for name, e in exponents.items():
        e = exact(e)
        if e != 0:
            items.append((name, e))
    return tuple(sorted(items))


class FracPoly:
    """Immutable fractional polynomial in canonical form.

    Canonical form: no two terms share an exponent map, no zero coefficients,
    terms ordered by their sorted ``(variable, exponent)`` tuples.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Mono, float] | Iterable[tuple[float, Mapping[str, Exponent]]] = ()):
        acc: dict[Mono, float] = {}
        if isinstance(terms, Mapping):
            items = ((c, dict(m)) for m, c in terms.items())
        else:
            items = terms
        for coeff, exps in items:
            key = _mono(exps)
            acc[key] = acc.get(key, 0.0) + float(coeff)
        self._terms = {k: acc[k] for k in sorted(acc) if acc[k] != 0.0}

    # construction helpers

    @classmethod
    def const(cls, c: float) -> FracPoly:
        return cls([(c, {})])

    @classmethod
    def var(cls, name: str, exponent: Exponent = 1, coeff: float = 1.0) -> FracPoly:
        return cls([(coeff, {name: exponent})])

    @classmethod
    def monomial(cls, coeff: float, exponents: Mapping[str, Exponent]) -> FracPoly:
        return cls([(coeff, exponents)])

    @classmethod
    def zero(cls) -> FracPoly:
        return cls()

    @classmethod
    def _raw(cls, terms: dict[Mono, float]) -> FracPoly:
        obj = object.__new__(cls)
        obj._terms = {k: terms[k] for k in sorted(terms) if terms[k] != 0.0}
        return obj

    # inspection

    def terms(self) -> Iterator[tuple[float, dict[str, Fraction]]]:
        for mono, c in self._terms.items():
            yield c, dict(mono)

    def items(self) -> Iterator[tuple[Mono, float]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(name for mono in self._terms for name, _ in mono)

    def coefficient(self, exponents: Mapping[str, Exponent] | None = None) -> float:
        """Coefficient of the monomial with the given exponents (0 if absent)."""
        return self._terms.get(_mono(exponents or {}), 0.0)

    def constant_term(self) -> float:
        return self._terms.get((), 0.0)

    def degree_in(self, name: str) -> set[Fraction]:
        return {dict(m).get(name, Fraction(0)) for m in self._terms}

    def split_by(self, name: str) -> dict[Fraction, FracPoly]:
        """Group terms by their exponent of ``name``; each group has ``name`` removed."""
        groups: dict[Fraction, dict[Mono, float]] = {}
        for mono, c in self._terms.items():
            d = dict(mono)
            e = d.pop(name, Fraction(0))
            groups.setdefault(e, {})[_mono(d)] = c
        return {e: FracPoly._raw(g) for e, g in groups.items()}

    # arithmetic

    def __add__(self, other: FracPoly | float) -> FracPoly:
        other = _lift(other)
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, 0.0) + c
        return FracPoly._raw(acc)

    __radd__ = __add__

    def __neg__(self) -> FracPoly:
        return FracPoly._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other: FracPoly | float) -> FracPoly:
        return self + (-_lift(other))

    def __rsub__(self, other: float) -> FracPoly:
        return _lift(other) - self

    def __mul__(self, other: FracPoly | float) -> FracPoly:
        if not isinstance(other, FracPoly):
            return self.scale(float(other))
        acc: dict[Mono, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                d = dict(m1)
                for name, e in m2:
                    d[name] = d.get(name, Fraction(0)) + e
                key = _mono(d)
                acc[key] = acc.get(key, 0.0) + c1 * c2
        return FracPoly._raw(acc)

    def __rmul__(self, other: float) -> FracPoly:
        return self.scale(float(other))

    def __truediv__(self, c: float) -> FracPoly:
        return self.scale(1.0 / float(c))

    def __pow__(self, k: int) -> FracPoly:
        if not isinstance(k, int) or k < 0:
            raise DomainError("polynomials are raised to nonnegative integer powers only")
        out = FracPoly.const(1.0)
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c: float) -> FracPoly:
        return FracPoly._raw({m: c * v for m, v in self._terms.items()})

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float)):
            other = FracPoly.const(other)
        if not isinstance(other, FracPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def allclose(self, other: FracPoly, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        """Same monomials with coefficients equal to ``rtol`` (or ``atol``)."""
        keys = set(self._terms) | set(other._terms)
        for k in keys:
            a, b = self._terms.get(k, 0.0), other._terms.get(k, 0.0)
            if abs(a - b) > max(atol, rtol * max(abs(a), abs(b))):
                return False
        return True

    def chop(self, tol: float) -> FracPoly:
        """Drop terms whose coefficient magnitude is at most ``tol``."""
        return FracPoly._raw({m: c for m, c in self._terms.items() if abs(c) > tol})

    def substitute(self, name: str, value: FracPoly, base: Exponent = 1) -> FracPoly:
        """Replace ``name^(k * base)`` by ``value^k`` for nonnegative integers ``k``."""
        base = exact(base)
        out = FracPoly()
        for e, rest in self.split_by(name).items():
            k = e / base
            if k.denominator != 1 or k < 0:
                raise DomainError(f"exponent {e} of {name} is not a nonnegative multiple of {base}")
            out = out + rest * value ** int(k)
        return out

    # evaluation

    def eval(self, point: Mapping[str, float]):
        """Numeric value at ``point``; array-valued points broadcast."""
        total = 0.0
        for mono, c in self._terms.items():
            term = c
            for name, e in mono:
                if name not in point:
                    raise DomainError(f"no value assigned to variable {name!r}")
                term = term * _power(point[name], e, name)
            total = total + term
        return total

    __call__ = eval

    # text form

    def to_text(self, alpha: FracOrder | float | None = None) -> str:
        """Serialize as ``coeff * var^exp * ...`` terms joined by `` + ``."""
        if not self._terms:
            return "0"
        a = exact(alpha) if alpha is not None else None
        parts = []
        for mono, c in self._terms.items():
            factors = [repr(float(c))]
            for name, e in mono:
                factors.append(name if e == 1 else f"{name}^{format_exponent(e, a)}")
            parts.append(" * ".join(factors))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"FracPoly({self.to_text()!r})"

    def __str__(self) -> str:
        return self.to_text()


def _lift(x: FracPoly | float) -> FracPoly:
    return x if isinstance(x, FracPoly) else FracPoly.const(float(x))


def _power(base, e: Fraction, name: str):
    if e.denominator == 1:
        k = int(e)
        if k < 0 and np.any(np.asarray(base) == 0):
            raise DomainError(f"term singular at {name} = 0")
        if isinstance(base, np.ndarray):
            return np.power(base.astype(float), k)
        return float(base) ** k
    arr = np.asarray(base, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"negative base for {name} under non-integer exponent {e}")
    if e < 0 and np.any(arr == 0):
        raise DomainError(f"term singular at {name} = 0")
    if isinstance(base, np.ndarray):
        return np.power(arr, float(e))
    return float(base) ** float(e)


def format_exponent(e: Fraction, alpha: Fraction | None = None, kmax: int = 12) -> str:
    """Lattice form ``m+k*a`` when ``e = m + k alpha`` with integers ``m >= 0``, ``1 <= k <= kmax``."""
    if e.denominator == 1:
        return str(e.numerator) if e >= 0 else f"({e.numerator})"
    if alpha is not None and e > 0:
        for k in range(1, kmax + 1):
            m = e - k * alpha
            if m < 0:
                break
            if m.denominator == 1:
                ka = "a" if k == 1 else f"{k}*a"
                if m == 0:
                    return ka if k == 1 else f"({ka})"
                return f"({m.numerator}+{ka})"
    return f"({e.numerator}/{e.denominator})"


# parsing

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


class _Tokens:
    def __init__(self, text: str) -> None:
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                break
            if m.group(1):
                self.items.append(("num", m.group(1), m.start(1)))
            elif m.group(2):
                self.items.append(("name", m.group(2), m.start(2)))
            else:
                self.items.append(("op", m.group(3), m.start(3)))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.items[self.i] if self.i < len(self.items) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise DomainError("unexpected end of polynomial text")
        self.i += 1
        return tok

    def accept(self, op: str) -> bool:
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == op:
            self.i += 1
            return True
        return False


def parse_poly(text: str, alpha: FracOrder | float | None = None) -> FracPoly:
    """Parse the text grammar written by :meth:`FracPoly.to_text`.

    Terms are products of a float coefficient and ``var`` / ``var^exp`` factors,
    separated by ``+`` or ``-``. Exponents are numbers, ``a`` (the order), or a
    parenthesized linear expression such as ``(1+2*a)`` or ``(1/3)``.
    """
    a = exact(alpha) if alpha is not None else None
    toks = _Tokens(text)
    out = FracPoly()
    sign = -1.0 if toks.accept("-") else 1.0
    if toks.peek() is None:
        raise DomainError("empty polynomial text")
    while True:
        out = out + _parse_term(toks, a).scale(sign)
        if toks.peek() is None:
            return out
        if toks.accept("+"):
            sign = -1.0 if toks.accept("-") else 1.0
        elif toks.accept("-"):
            sign = -1.0
        else:
            _, val, pos = toks.peek()
            raise DomainError(f"unexpected {val!r} at column {pos + 1}")


def _parse_term(toks: _Tokens, a: Fraction | None) -> FracPoly:
    coeff = 1.0
    exps: dict[str, Fraction] = {}
    while True:
        kind, val, pos = toks.take()
        if kind == "num":
            coeff *= float(val)
        elif kind == "name":
            if val == ORDER_SYMBOL:
                raise DomainError(f"{ORDER_SYMBOL!r} is reserved for the order (column {pos + 1})")
            e = Fraction(1)
            if toks.accept("^"):
                e = _parse_exp_atom(toks, a)
            exps[val] = exps.get(val, Fraction(0)) + e
        else:
            raise DomainError(f"unexpected {val!r} at column {pos + 1}")
        if not toks.accept("*"):
            return FracPoly.monomial(coeff, exps)


def _parse_exp_atom(toks: _Tokens, a: Fraction | None) -> Fraction:
    kind, val, pos = toks.take()
    if kind == "op" and val == "-":
        return -_parse_exp_atom(toks, a)
    if kind == "num":
        return Fraction(val)
    if kind == "name" and val == ORDER_SYMBOL:
        if a is None:
            raise DomainError("exponent uses the order symbol but no order was given")
        return a
    if kind == "op" and val == "(":
        e = _parse_exp_sum(toks, a)
        if not toks.accept(")"):
            raise DomainError(f"missing ')' in exponent opened at column {pos + 1}")
        return e
    raise DomainError(f"bad exponent {val!r} at column {pos + 1}")


def _parse_exp_sum(toks: _Tokens, a: Fraction | None) -> Fraction:
    total = Fraction(0)
    sign = -1 if toks.accept("-") else 1
    while True:
        term = _parse_exp_atom(toks, a)
        while True:
            if toks.accept("*"):
                term *= _parse_exp_atom(toks, a)
            elif toks.accept("/"):
                term /= _parse_exp_atom(toks, a)
            else:
                break
        total += sign * term
        if toks.accept("+"):
            sign = 1
        elif toks.accept("-"):
            sign = -1
        else:
            return total


# calculus

@dataclass(frozen=True)
class Chart:
    """Variable names of a jet-bundle chart with ``n`` coordinates.

    ``x`` are positions, ``y`` the normalized fractional velocities
    ``y^{i(alpha)}``, ``y2`` the second symbols ``y^{i(2 alpha)}``, ``p`` the
    momenta. ``lam``/``dlam`` name a Lagrange multiplier and its fractional
    derivative, ``disc`` the discount factor ``E_alpha(-rho t^alpha)``.
    """

    x: tuple[str, ...]
    y: tuple[str, ...]
    y2: tuple[str, ...]
    p: tuple[str, ...]
    t: str = "t"
    lam: str = "lambda"
    dlam: str = "dlambda"
    disc: str = "E"

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def standard(cls, n: int) -> Chart:
        """``x, y, y2, p`` for one coordinate, ``x_1 ... x_n`` etc. otherwise."""
        if n < 1:
            raise DomainError("a chart needs at least one coordinate")
        if n == 1:
            return cls(("x",), ("y",), ("y2",), ("p",))
        r = range(1, n + 1)
        return cls(
            tuple(f"x_{i}" for i in r),
            tuple(f"y_{i}" for i in r),
            tuple(f"y2_{i}" for i in r),
            tuple(f"p_{i}" for i in r),
        )

    @classmethod
    def named(cls, names: Iterable[str]) -> Chart:
        """Positions with custom names, e.g. ``K, I, N -> y_K, y2_K, p_K``."""
        names = tuple(names)
        return cls(
            names,
            tuple(f"y_{s}" for s in names),
            tuple(f"y2_{s}" for s in names),
            tuple(f"p_{s}" for s in names),
        )


def _chart(n: int | Chart) -> Chart:
    return n if isinstance(n, Chart) else Chart.standard(int(n))


def frac_partial(P: FracPoly, v: str, order: FracOrder | float | Fraction) -> FracPoly:
    """Caputo partial derivative of ``P`` in ``v`` by the termwise power rule.

    Terms free of ``v`` vanish, as do integer powers below the order's ceiling.
    ``order`` may be any positive value; order 1 gives the classical derivative.
    """
    q = exact(order)
    if q <= 0:
        raise DomainError(f"derivative order must be positive, got {q}")
    m = math.ceil(q)
    acc: dict[Mono, float] = {}
    for mono, c in P.items():
        d = dict(mono)
        g = d.get(v)
        if g is None:
            continue
        if g < 0:
            raise DomainError(f"negative exponent {g} of {v} lies outside the power rule")
        if g.denominator == 1 and g < m:
            continue
        if g < m - 1:
            raise DomainError(f"Caputo derivative of order {q} undefined for {v}^{g}")
        new = g - q
        if new.denominator == 1 and new < 0 and (1 + new) <= 0:
            raise PoleError(f"power rule pole for {v}^{g} at order {q}")
        coeff = c * gamma_ratio(float(1 + g), float(1 + new))
        if new == 0:
            d.pop(v)
        else:
            d[v] = new
        key = _mono(d)
        acc[key] = acc.get(key, 0.0) + coeff
    return FracPoly._raw(acc)


def dt_alpha_total(P: FracPoly, n: int | Chart, order: FracOrder | float) -> FracPoly:
    """Total operator ``D_t^alpha + y^i D_{x^i}^alpha`` applied to ``P``."""
    ch = _chart(n)
    out = frac_partial(P, ch.t, order)
    for xi, yi in zip(ch.x, ch.y):
        out = out + FracPoly.var(yi) * frac_partial(P, xi, order)
    return out


def dt_2alpha_total(P: FracPoly, n: int | Chart, order: FracOrder | float) -> FracPoly:
    """Total operator ``D_t^alpha + y^i D_{x^i}^alpha + y2^i D_{y^i}^alpha`` applied to ``P``."""
    ch = _chart(n)
    out = dt_alpha_total(P, ch, order)
    for yi, zi in zip(ch.y, ch.y2):
        out = out + FracPoly.var(zi) * frac_partial(P, yi, order)
    return out


def taylor_reconstruct(P: FracPoly, order: FracOrder | float, k_max: int, var: str = "t") -> FracPoly:
    """Rebuild ``P(t) = sum_a t^(a alpha) / Gamma(1 + a alpha) * (D^alpha)^a P |_{t=0}``.

    The coefficients come from ``a`` successive power-rule derivatives
    evaluated at the origin. ``P`` must be a combination of ``t^(a alpha)``
    with integer ``0 <= a <= k_max``.
    """
    q = exact(order)
    extra = P.variables - {var}
    if extra:
        raise DomainError(f"taylor_reconstruct expects a polynomial in {var} only, got {sorted(extra)}")
    for e in P.degree_in(var):
        k = e / q
        if k.denominator != 1 or not 0 <= k <= k_max:
            raise DomainError(f"exponent {e} is not on the lattice a*{q} with 0 <= a <= {k_max}")
    out = FracPoly()
    current = P
    for a in range(k_max + 1):
        value = current.constant_term()
        if value != 0.0:
            out = out + FracPoly.var(var, a * q, value / gamma_fn(float(1 + a * q)))
        current = frac_partial(current, var, q)
    return out
