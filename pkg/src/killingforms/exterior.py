"""Alternating forms at a point and form fields on a chart.

Components are stored sparsely on strictly increasing multi-indices.
Coefficients may be plain (complex) numbers or :class:`Jet` values; all
algebra below is written against the scalar protocol so both work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import autodiff as ad

MultiIndex = tuple[int, ...]


def sort_sign(idx: Sequence[int]) -> tuple[int, MultiIndex]:
    """Sign of the permutation sorting ``idx``; 0 if an index repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


@dataclass(frozen=True)
class FormValue:
    dim: int
    degree: int
    coeffs: Mapping[MultiIndex, object] = field(default_factory=dict)

    def __post_init__(self):
        for idx in self.coeffs:
            if len(idx) != self.degree:
                raise ValueError(f"index {idx} has wrong length for a {self.degree}-form")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index {idx} is not strictly increasing")
            if idx and not (0 <= idx[0] and idx[-1] < self.dim):
                raise ValueError(f"index {idx} out of range for dimension {self.dim}")

    @classmethod
    def zero(cls, dim: int, degree: int) -> "FormValue":
        return cls(dim, degree, {})

    @classmethod
    def scalar(cls, dim: int, value) -> "FormValue":
        return cls(dim, 0, {(): value})

    @classmethod
    def basis(cls, dim: int, *indices: int) -> "FormValue":
        """``dx^{i1} ^ ... ^ dx^{ik}`` in any index order."""
        sign, idx = sort_sign(indices)
        if sign == 0:
            return cls.zero(dim, len(indices))
        return cls(dim, len(indices), {idx: float(sign)})

    @classmethod
    def from_unsorted(cls, dim: int, degree: int, items: Iterable[tuple[Sequence[int], object]]) -> "FormValue":
        out: dict[MultiIndex, object] = {}
        for raw, v in items:
            sign, idx = sort_sign(raw)
            if sign == 0:
                continue
            v = v if sign > 0 else -v
            out[idx] = out[idx] + v if idx in out else v
        return cls(dim, degree, out)

    def __getitem__(self, idx: Sequence[int]):
        sign, key = sort_sign(idx)
        if sign == 0 or key not in self.coeffs:
            return 0.0
        v = self.coeffs[key]
        return v if sign > 0 else -v

    def _check(self, other: "FormValue"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "FormValue") -> "FormValue":
        self._check(other)
        if self.degree != other.degree:
            raise ValueError("adding forms of different degrees")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return FormValue(self.dim, self.degree, out)

    def __neg__(self) -> "FormValue":
        return FormValue(self.dim, self.degree, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other: "FormValue") -> "FormValue":
        return self + (-other)

    def __mul__(self, s) -> "FormValue":
        return FormValue(self.dim, self.degree, {k: v * s for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "FormValue") -> "FormValue":
        return wedge(self, other)

    def map(self, f: Callable) -> "FormValue":
        return FormValue(self.dim, self.degree, {k: f(v) for k, v in self.coeffs.items()})

    def values(self) -> "FormValue":
        """Drop derivative information, keeping complex values."""
        return self.map(lambda v: complex(ad.value_of(v)))

    def real(self) -> "FormValue":
        return self.map(lambda v: v.real)

    def imag(self) -> "FormValue":
        return self.map(lambda v: v.imag)

    def vector(self) -> np.ndarray:
        """Dense complex coefficient vector over all increasing indices."""
        idxs = list(combinations(range(self.dim), self.degree))
        return np.array([complex(ad.value_of(self.coeffs.get(i, 0.0))) for i in idxs])

    def shifted(self, dim: int, offset: int) -> "FormValue":
        """Same form with every index moved up by ``offset`` in a ``dim``-dim space."""
        return FormValue(dim, self.degree, {tuple(i + offset for i in k): v for k, v in self.coeffs.items()})

    def max_abs(self) -> float:
        return max((abs(complex(ad.value_of(v))) for v in self.coeffs.values()), default=0.0)


def wedge(a: FormValue, b: FormValue) -> FormValue:
    a._check(b)
    deg = a.degree + b.degree
    if deg > a.dim:
        return FormValue.zero(a.dim, deg)
    items = []
    for ka, va in a.coeffs.items():
        for kb, vb in b.coeffs.items():
            if set(ka) & set(kb):
                continue
            items.append((ka + kb, va * vb))
    return FormValue.from_unsorted(a.dim, deg, items)


def wedge_all(forms: Sequence[FormValue]) -> FormValue:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def one_form(components: Sequence) -> FormValue:
    return FormValue(len(components), 1, {(i,): c for i, c in enumerate(components)})


def interior(v: Sequence, a: FormValue) -> FormValue:
    """Contraction ``v _| a`` into the first slot."""
    if a.degree < 1:
        raise ValueError("cannot contract a 0-form")
    if len(v) != a.dim:
        raise ValueError("vector and form dimensions differ")
    items = []
    for k, c in a.coeffs.items():
        for s, j in enumerate(k):
            if v[j] == 0:
                continue
            term = c * v[j]
            items.append((k[:s] + k[s + 1 :], term if s % 2 == 0 else -term))
    return FormValue.from_unsorted(a.dim, a.degree - 1, items)


def ext_deriv_at(F: FormValue, variables: Sequence[int] | None = None) -> FormValue:
    """Exterior derivative from the jets carried by the coefficients of ``F``.

    ``variables[k]`` is the jet variable of coordinate ``k`` (identity by
    default).  Coefficient jets lose one order.
    """
    if variables is None:
        variables = range(F.dim)
    variables = list(variables)
    items = []
    for k, c in F.coeffs.items():
        if not isinstance(c, ad.Jet):
            continue
        for i in range(F.dim):
            if i in k:
                continue
            dc = c.partial(variables[i])
            items.append(((i,) + k, dc))
    return FormValue.from_unsorted(F.dim, F.degree + 1, items)


def compound(m: np.ndarray, p: int) -> np.ndarray:
    """p-th compound matrix: minors det(m[I, J]) over increasing I, J."""
    if p == 0:
        return np.ones((1, 1))
    n = m.shape[0]
    idxs = np.array(list(combinations(range(n), p)), dtype=int).reshape(-1, p)
    sub = m[idxs[:, None, :, None], idxs[None, :, None, :]]
    return np.linalg.det(sub)


def form_inner(g_inv: np.ndarray, a: FormValue, b: FormValue) -> complex:
    """Sum over increasing I, J of a_I conj(b_J) det(g_inv[I, J])."""
    g_inv = np.asarray(g_inv)
    if g_inv.ndim != 2 or g_inv.shape[0] != g_inv.shape[1]:
        raise ValueError("g_inv must be square")
    if a.degree != b.degree:
        raise ValueError("inner product of forms of different degrees")
    if g_inv.shape[0] != a.dim:
        raise ValueError("metric and form dimensions differ")
    G = compound(g_inv, a.degree)
    return complex(a.vector() @ G @ np.conj(b.vector()))


def form_norm(g_inv: np.ndarray, a: FormValue) -> float:
    return float(np.sqrt(max(form_inner(g_inv, a, a).real, 0.0)))


def pullback_linear(F: FormValue, T: np.ndarray) -> FormValue:
    """Pull back along ``u = T x``: ``du^J = sum_I det(T[J, I]) dx^I``."""
    T = np.asarray(T, dtype=float)
    m, n = T.shape
    if m != F.dim:
        raise ValueError("map and form dimensions differ")
    out: dict[MultiIndex, object] = {}
    for J, c in F.coeffs.items():
        for I in combinations(range(n), F.degree):
            d = float(np.linalg.det(T[np.ix_(J, I)])) if J else 1.0
            if abs(d) < 1e-15:
                continue
            out[I] = out[I] + c * d if I in out else c * d
    return FormValue(n, F.degree, out)


@dataclass(frozen=True)
class FormField:
    """A p-form field: ``func(coords) -> FormValue`` over any scalar type."""

    dim: int
    degree: int
    func: Callable[[Sequence], FormValue]
    name: str = ""

    def __call__(self, coords: Sequence) -> FormValue:
        out = self.func(coords)
        if out.dim != self.dim or out.degree != self.degree:
            raise ValueError(f"field {self.name or '?'} returned a {out.degree}-form in dimension {out.dim}")
        return out

    def at(self, point: Sequence[float], order: int = 2) -> FormValue:
        return self(ad.seed_all(point, order))


def constant_field(F: FormValue, name: str = "") -> FormField:
    return FormField(F.dim, F.degree, lambda X: F, name)


def d(F: FormField) -> FormField:
    """Exterior derivative as a field; inputs must be seeded coordinates."""

    def func(X):
        return ext_deriv_at(F(X), [ad.coordinate_variable(x) for x in X])

    return FormField(F.dim, F.degree + 1, func, f"d({F.name})")


def wedge_fields(a: FormField, b: FormField) -> FormField:
    return FormField(a.dim, a.degree + b.degree, lambda X: wedge(a(X), b(X)), f"{a.name}^{b.name}")


def ext_deriv(F: FormField, point: Sequence[float], order: int = 2) -> FormValue:
    return ext_deriv_at(F.at(point, order))


def to_dense(F: FormValue) -> np.ndarray:
    """Fully antisymmetric component array of shape ``(dim,) * degree``."""
    A = np.zeros((F.dim,) * F.degree, dtype=complex)
    for key, v in F.coeffs.items():
        v = complex(ad.value_of(v))
        for perm in permutations(range(F.degree)):
            sign, _ = sort_sign(perm)
            A[tuple(key[p] for p in perm)] = sign * v
    return A


def from_dense(A: np.ndarray, dim: int, degree: int) -> FormValue:
    if degree == 0:
        return FormValue(dim, 0, {(): complex(A)})
    return FormValue(dim, degree, {idx: complex(A[idx]) for idx in combinations(range(dim), degree)})
