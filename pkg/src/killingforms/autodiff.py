"""Truncated multivariate Taylor jets for forward-mode differentiation.

A :class:`Jet` stores the Taylor coefficients of a scalar function around a
point, up to a fixed total order, with respect to an ordered set of active
variables.  Order 2 (value, gradient, Hessian) is the default; derived fields
such as ``d(eta)`` consume one order per exterior derivative, so callers that
differentiate twice seed at order 3.

Coefficients live in a monomial basis: ``f(x0 + h) = sum_a c_a h^a``.  Each
mixed partial is therefore stored once, which makes the Hessian exactly
symmetric.  Complex-valued jets (the carrier for complex form coefficients)
are ordinary jets with a complex coefficient array.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from numbers import Number
from typing import Callable, Sequence

import numpy as np


class DomainError(ValueError):
    """An elementary function was applied outside its domain."""


class JetOrderError(ValueError):
    """A derivative was requested beyond the jet's truncation order."""


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``.

    Instances are cached, so two jets are compatible iff ``a.space is b.space``.
    """

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos: list[tuple[int, ...]] = []
        for deg in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), deg):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                monos.append(tuple(e))
        self.monomials = monos
        self.index = {m: k for k, m in enumerate(monos)}
        self.size = len(monos)
        self.degree = np.array([sum(m) for m in monos], dtype=int)

        # product table, grouped by result monomial for np.add.reduceat
        ia, ib, ic = [], [], []
        for x, ma in enumerate(monos):
            for y, mb in enumerate(monos):
                if self.degree[x] + self.degree[y] > order:
                    continue
                mc = tuple(p + q for p, q in zip(ma, mb))
                ia.append(x)
                ib.append(y)
                ic.append(self.index[mc])
        perm = np.argsort(ic, kind="stable")
        self._ia = np.asarray(ia)[perm]
        self._ib = np.asarray(ib)[perm]
        ic_sorted = np.asarray(ic)[perm]
        self._starts = np.flatnonzero(np.r_[True, ic_sorted[1:] != ic_sorted[:-1]])

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.add.reduceat(a[self._ia] * b[self._ib], self._starts)

    def unit(self, k: int) -> int:
        e = [0] * self.nvars
        e[k] = 1
        return self.index[tuple(e)]

    def pair(self, i: int, j: int) -> int:
        e = [0] * self.nvars
        e[i] += 1
        e[j] += 1
        return self.index[tuple(e)]

    @lru_cache(maxsize=None)
    def _partial_map(self, k: int):
        lower = get_space(self.nvars, self.order - 1)
        src, dst, fac = [], [], []
        for idx, m in enumerate(self.monomials):
            if m[k] == 0:
                continue
            e = list(m)
            e[k] -= 1
            src.append(idx)
            dst.append(lower.index[tuple(e)])
            fac.append(m[k])
        return lower, np.asarray(src, int), np.asarray(dst, int), np.asarray(fac, float)

    def __repr__(self) -> str:
        return f"JetSpace(nvars={self.nvars}, order={self.order})"


@lru_cache(maxsize=None)
def get_space(nvars: int, order: int) -> JetSpace:
    if nvars < 0 or order < 0:
        raise ValueError("nvars and order must be non-negative")
    return JetSpace(nvars, order)


@lru_cache(maxsize=None)
def _embed_map(src: JetSpace, dst: JetSpace, offset: int) -> np.ndarray:
    idx = []
    for m in src.monomials:
        e = [0] * dst.nvars
        e[offset : offset + src.nvars] = m
        idx.append(dst.index[tuple(e)])
    return np.asarray(idx, int)


@lru_cache(maxsize=None)
def _restrict_map(src: JetSpace, keep: int) -> tuple[JetSpace, np.ndarray]:
    dst = get_space(keep, src.order)
    idx = [src.index[m + (0,) * (src.nvars - keep)] for m in dst.monomials]
    return dst, np.asarray(idx, int)


class Jet:
    """Truncated Taylor expansion of a (possibly complex) scalar."""

    __slots__ = ("space", "c")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # ---- construction -------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, value) -> "Jet":
        c = np.zeros(space.size, dtype=np.result_type(float, type(value)))
        c[0] = value
        return cls(space, c)

    # ---- views --------------------------------------------------------
    @property
    def order(self) -> int:
        return self.space.order

    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def value(self):
        return self.c[0]

    @property
    def grad(self) -> np.ndarray:
        if self.order < 1:
            raise JetOrderError("gradient needs a jet of order >= 1")
        s = self.space
        return np.array([self.c[s.unit(k)] for k in range(s.nvars)])

    @property
    def hess(self) -> np.ndarray:
        if self.order < 2:
            raise JetOrderError("Hessian needs a jet of order >= 2")
        s = self.space
        n = s.nvars
        h = np.zeros((n, n), dtype=self.c.dtype)
        for i in range(n):
            for j in range(i, n):
                v = self.c[s.pair(i, j)] * (2.0 if i == j else 1.0)
                h[i, j] = v
                h[j, i] = v
        return h

    @property
    def real(self) -> "Jet":
        return Jet(self.space, self.c.real.copy())

    @property
    def imag(self) -> "Jet":
        return Jet(self.space, self.c.imag.copy())

    def conjugate(self) -> "Jet":
        return Jet(self.space, np.conj(self.c))

    def partial(self, k: int) -> "Jet":
        """Derivative along variable ``k``; the result has order one lower."""
        if self.order < 1:
            raise JetOrderError("partial derivative of an order-0 jet")
        lower, src, dst, fac = self.space._partial_map(k)
        c = np.zeros(lower.size, dtype=self.c.dtype)
        c[dst] = self.c[src] * fac
        return Jet(lower, c)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetOrderError("cannot raise the order of a jet")
        sp = get_space(self.nvars, order)
        return Jet(sp, self.c[: sp.size].copy())

    def embed(self, nvars: int, offset: int = 0, order: int | None = None) -> "Jet":
        """Re-express in a larger variable set; own variables start at ``offset``.

        Raising ``order`` pads the new top-degree coefficients with zeros, so
        only monomials that also involve the added variables stay exact.
        """
        dst = get_space(nvars, self.order if order is None else order)
        if dst.order < self.order:
            raise JetOrderError("embedding cannot lower the order")
        c = np.zeros(dst.size, dtype=self.c.dtype)
        c[_embed_map(self.space, dst, offset)] = self.c
        return Jet(dst, c)

    def restrict(self, keep: int) -> "Jet":
        """Freeze all variables past the first ``keep`` at their base values."""
        dst, idx = _restrict_map(self.space, keep)
        return Jet(dst, self.c[idx].copy())

    # ---- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.space is not self.space:
                if other.nvars != self.nvars:
                    raise ValueError("jets over different variable sets")
                order = min(self.order, other.order)
                return other.truncate(order)
            return other
        return Jet.constant(self.space, other)

    def _align(self, other):
        o = self._coerce(other)
        s = self if o.order == self.order else self.truncate(o.order)
        return s, o

    def __add__(self, other):
        if isinstance(other, Number):
            c = self.c.astype(np.result_type(self.c, other), copy=True)
            c[0] += other
            return Jet(self.space, c)
        s, o = self._align(other)
        return Jet(s.space, s.c + o.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Jet(self.space, self.c * other)
        s, o = self._align(other)
        return Jet(s.space, s.space.mul(s.c, o.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            if other == 0:
                raise DomainError("division by zero")
            return Jet(self.space, self.c / other)
        o = self._coerce(other)
        return _with_value(self * reciprocal(o), lambda: self.value / o.value)

    def __rtruediv__(self, other):
        return _with_value(reciprocal(self) * other, lambda: other / self.value)

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            raise TypeError("jet exponents are not supported; use a constant")
        return power(self, exponent)

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, nvars={self.nvars}, order={self.order})"


# ---------------------------------------------------------------------------
# seeding and reading derivatives


def seed(point: Sequence[float], k: int, order: int = 2) -> Jet:
    """Jet of the ``k``-th coordinate function at ``point``."""
    n = len(point)
    if not 0 <= k < n:
        raise IndexError(f"coordinate index {k} out of range for {n} variables")
    sp = get_space(n, order)
    c = np.zeros(sp.size)
    c[0] = float(point[k])
    if order >= 1:
        c[sp.unit(k)] = 1.0
    return Jet(sp, c)


def seed_all(point: Sequence[float], order: int = 2) -> list[Jet]:
    return [seed(point, k, order) for k in range(len(point))]


def value_of(x) -> complex | float:
    return x.value if isinstance(x, Jet) else x


def _evaluate(f: Callable, point: Sequence[float], order: int) -> Jet:
    out = f(seed_all(point, order))
    return out if isinstance(out, Jet) else Jet.constant(get_space(len(point), order), out)


def partials(f: Callable[[list[Jet]], Jet], point: Sequence[float], i: int) -> float:
    """``df/dx^i`` at ``point``; constants give 0."""
    return float(np.real_if_close(_evaluate(f, point, 1).grad[i]))


def second_partials(f: Callable[[list[Jet]], Jet], point: Sequence[float], i: int, j: int) -> float:
    return float(np.real_if_close(_evaluate(f, point, 2).hess[i, j]))


def coordinate_variable(x: Jet) -> int:
    """Index of the variable that ``x`` is a pure seed of."""
    if not isinstance(x, Jet) or x.order < 1:
        raise JetOrderError("coordinate input must be a seeded jet of order >= 1")
    g = x.grad
    hits = np.flatnonzero(g != 0)
    if len(hits) != 1 or g[hits[0]] != 1.0:
        raise ValueError("coordinate input is not a pure seed")
    return int(hits[0])


# ---------------------------------------------------------------------------
# elementary functions


def _with_value(j: Jet, value: Callable[[], object]) -> Jet:
    """Replace the constant term so jet and plain arithmetic round identically."""
    c = j.c.copy()
    c[0] = value()
    return Jet(j.space, c)


def _compose(x: Jet, derivs: Sequence) -> Jet:
    """f(x) from the list f(x0), f'(x0), ..., f^(K)(x0)."""
    K = x.order
    h = x.c.copy()
    h[0] = 0
    out = np.zeros(x.space.size, dtype=np.result_type(x.c, *[type(d) for d in derivs]))
    out[0] = derivs[0]
    if K == 0:
        return Jet(x.space, out)
    hk = h
    fact = 1.0
    for k in range(1, K + 1):
        fact *= k
        out = out + (derivs[k] / fact) * hk
        if k < K:
            hk = x.space.mul(hk, h)
    return Jet(x.space, out)


def _real_value(x: Jet, name: str) -> float:
    v = x.value
    if np.iscomplexobj(x.c):
        if v.imag != 0 or np.any(x.c.imag != 0):
            raise TypeError(f"{name} is only defined for real jets")
        v = v.real
    return float(v)


def _realify(x: Jet) -> Jet:
    return x.real if np.iscomplexobj(x.c) else x


def reciprocal(x):
    if not isinstance(x, Jet):
        if x == 0:
            raise DomainError("division by zero")
        return 1.0 / x
    v = x.value
    if v == 0:
        raise DomainError("division by zero")
    K = x.order
    derivs = [1.0 / v]
    for k in range(1, K + 1):
        derivs.append(-k * derivs[-1] / v)
    return _compose(x, derivs)


def power(x, exponent: float):
    """``x**exponent`` for a constant real exponent."""
    if isinstance(exponent, Jet):
        raise TypeError("exponent must be a constant")
    exponent = float(exponent)
    if not isinstance(x, Jet):
        if x < 0 and not exponent.is_integer():
            raise DomainError("fractional power of a negative number")
        if x == 0 and exponent < 0:
            raise DomainError("division by zero")
        return float(x) ** exponent
    if exponent.is_integer() and exponent >= 0:
        e = int(exponent)
        if e == 0:
            return Jet.constant(x.space, 1.0)
        out = x
        for _ in range(e - 1):
            out = out * x
        return _with_value(out, lambda: x.value**e)
    v = _real_value(x, "pow")
    if v < 0 and not exponent.is_integer():
        raise DomainError("fractional power of a negative number")
    if v == 0:
        raise DomainError("non-integer or negative power at zero")
    derivs = []
    coef = 1.0
    for k in range(x.order + 1):
        derivs.append(coef * v ** (exponent - k))
        coef *= exponent - k
    return _compose(_realify(x), derivs)


def sqrt(x):
    if not isinstance(x, Jet):
        if x < 0:
            raise DomainError("sqrt of a negative number")
        return math.sqrt(x)
    v = _real_value(x, "sqrt")
    if v <= 0:
        raise DomainError("sqrt at or below zero")
    return _with_value(power(x, 0.5), lambda: math.sqrt(v))


def exp(x):
    if not isinstance(x, Jet):
        return math.exp(x)
    e = math.exp(_real_value(x, "exp"))
    return _compose(_realify(x), [e] * (x.order + 1))


def ln(x):
    if not isinstance(x, Jet):
        if x <= 0:
            raise DomainError("ln of a non-positive number")
        return math.log(x)
    v = _real_value(x, "ln")
    if v <= 0:
        raise DomainError("ln of a non-positive number")
    derivs = [math.log(v)]
    for k in range(1, x.order + 1):
        derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / v**k)
    return _compose(_realify(x), derivs)


def sin(x):
    if not isinstance(x, Jet):
        return math.sin(x)
    v = _real_value(x, "sin")
    s, c = math.sin(v), math.cos(v)
    cyc = [s, c, -s, -c]
    return _compose(_realify(x), [cyc[k % 4] for k in range(x.order + 1)])


def cos(x):
    if not isinstance(x, Jet):
        return math.cos(x)
    v = _real_value(x, "cos")
    s, c = math.sin(v), math.cos(v)
    cyc = [c, -s, -c, s]
    return _compose(_realify(x), [cyc[k % 4] for k in range(x.order + 1)])


_TAN_POLE_TOL = 1e-12


def tan(x):
    v = _real_value(x, "tan") if isinstance(x, Jet) else float(x)
    if abs(math.cos(v)) < _TAN_POLE_TOL:
        raise DomainError("tan at a pole")
    if not isinstance(x, Jet):
        return math.tan(x)
    # d/dv P(tan v) = P'(tan v) (1 + tan^2 v), starting from P = t
    t = math.tan(v)
    poly = np.polynomial.Polynomial([0.0, 1.0])
    sec2 = np.polynomial.Polynomial([1.0, 0.0, 1.0])
    derivs = [t]
    for _ in range(x.order):
        poly = poly.deriv() * sec2
        derivs.append(float(poly(t)))
    return _compose(_realify(x), derivs)


def absolute(x):
    if not isinstance(x, Jet):
        if x == 0:
            raise DomainError("abs is not differentiable at 0")
        return abs(x)
    v = _real_value(x, "abs")
    if v == 0:
        raise DomainError("abs is not differentiable at 0")
    return x if v > 0 else -x


def expi(x):
    """``exp(i*x)`` for a real argument."""
    return cos(x) + 1j * sin(x)


def det(m: Sequence[Sequence]):
    """Determinant by cofactor expansion; works for any scalar type."""
    n = len(m)
    if n == 0:
        return 1.0
    if any(len(row) != n for row in m):
        raise ValueError("determinant of a non-square matrix")
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = 0.0
    for j in range(n):
        sub = [row[:j] + row[j + 1 :] for row in m[1:]]
        term = m[0][j] * det(sub)
        total = total + term if j % 2 == 0 else total - term
    return total
