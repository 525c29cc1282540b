"""Special Killing forms from the complex volume form of a toric Kaehler cone.

Foliated cone coordinates are ``(r; f^2..f^n, phi^1..phi^n)`` with complex
coordinates ``z^i = x^i(r, f) + i phi^i`` and ``Omega = e^{z^1} dz^1 ^ ... ^ dz^n``.
The base form ``omega`` solves ``Omega = r^{n-1} dr ^ omega + (r^n/n) d omega``
and is read off the ``dr`` part of ``Omega`` by a closed combinatorial sum
over index triples (J, i, K) and column sets L of the Jacobi matrix.

Index conventions: row ``i`` and the sets J, K, L are 1-based as in the
combinatorial formula; the base coframe of dimension ``2n - 1`` is ordered
``df^2..df^n, dphi^1..dphi^n`` and the cone coframe prepends ``dr``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import exprlang
from .exterior import FormField, FormValue, ext_deriv_at, one_form, pullback_linear, wedge, wedge_all


class FoliationError(ValueError):
    pass


@dataclass(frozen=True)
class FoliationMap:
    """Maps ``x^i(r, f^2..f^n)`` plus an affine link to chart coordinates.

    ``T`` and ``offset`` give the foliated base coordinates
    ``u = (f^2..f^n, phi^1..phi^n)`` as ``u = T x + offset`` in terms of the
    chart coordinates ``x`` (``chart_coords``).
    """

    n: int
    x: tuple[Callable, ...]
    f_names: tuple[str, ...]
    angle_names: tuple[str, ...]
    chart_coords: tuple[str, ...] | None = None
    T: np.ndarray | None = None
    offset: np.ndarray | None = None
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.x) != self.n:
            raise FoliationError(f"expected {self.n} maps x^i, got {len(self.x)}")
        if len(self.f_names) != self.n - 1 or len(self.angle_names) != self.n:
            raise FoliationError("need n-1 leaf coordinates and n angles")

    @property
    def base_dim(self) -> int:
        return 2 * self.n - 1

    @property
    def base_names(self) -> tuple[str, ...]:
        return self.f_names + self.angle_names

    def to_foliated(self, chart_point: Sequence) -> list:
        """``u = T x + offset``; works on floats and jets."""
        if self.T is None:
            raise FoliationError("foliation has no chart link")
        out = []
        for row, c in zip(self.T, self.offset):
            acc = float(c)
            for coef, xv in zip(row, chart_point):
                if coef != 0:
                    acc = acc + float(coef) * xv
            out.append(acc)
        return out

    def to_chart(self, u: Sequence[float]) -> np.ndarray:
        return np.linalg.solve(self.T, np.asarray(u, float) - self.offset)

    @classmethod
    def from_exprs(
        cls,
        x: Sequence[str],
        f_names: Sequence[str],
        angle_names: Sequence[str],
        params: Mapping[str, float] | None = None,
        chart_coords: Sequence[str] | None = None,
        coord_exprs: Mapping[str, str] | None = None,
        r_name: str = "r",
    ) -> "FoliationMap":
        params = dict(params or {})
        f_names = tuple(f_names)
        angle_names = tuple(angle_names)
        names = [r_name, *f_names]
        compiled = []
        for src in x:
            f = exprlang.compile_expr(src, names, params)
            compiled.append(lambda r, fv, f=f: f([r, *fv]))
        T = offset = None
        if chart_coords is not None:
            chart_coords = tuple(chart_coords)
            exprs = dict(coord_exprs or {})
            for nm in f_names + angle_names:
                if nm not in exprs:
                    if nm not in chart_coords:
                        raise FoliationError(f"no expression links {nm!r} to the chart")
                    exprs[nm] = nm
            T, offset = _affine_link([exprs[nm] for nm in f_names + angle_names], list(chart_coords), params)
        return cls(len(compiled), tuple(compiled), f_names, angle_names, chart_coords, T, offset, tuple(x))

    @classmethod
    def from_json(cls, data: Mapping, chart_coords: Sequence[str] | None = None, params: Mapping[str, float] | None = None) -> "FoliationMap":
        try:
            fol = cls.from_exprs(
                data["x"], data["f_names"], data["angle_names"], params, chart_coords, data.get("coords")
            )
        except KeyError as exc:
            raise FoliationError(f"foliation definition lacks {exc}") from None
        if "n" in data and data["n"] != fol.n:
            raise FoliationError("n does not match the number of maps")
        return fol


def _affine_link(exprs: Sequence[str], coords: list[str], params) -> tuple[np.ndarray, np.ndarray]:
    funcs = [exprlang.compile_expr(s, coords, params) for s in exprs]
    m = len(coords)
    if len(funcs) != m:
        raise FoliationError("foliated and chart coordinates differ in number")
    rng = np.random.default_rng(0)
    rows = []
    offs = []
    for f in funcs:
        probe = []
        for pt in (np.zeros(m), rng.uniform(0.1, 1.0, m)):
            v = f(ad.seed_all(pt, 2))
            v = v if isinstance(v, ad.Jet) else ad.Jet.constant(ad.get_space(m, 2), v)
            if np.any(np.abs(v.hess) > 1e-14):
                raise FoliationError("foliated coordinates must be affine in chart coordinates")
            probe.append((np.real(v.grad), float(np.real(v.value)) - float(np.real(v.grad) @ pt)))
        if not np.allclose(probe[0][0], probe[1][0], atol=1e-14):
            raise FoliationError("foliated coordinates must be affine in chart coordinates")
        rows.append(probe[0][0])
        offs.append(probe[0][1])
    T = np.array(rows)
    if abs(np.linalg.det(T)) < 1e-12:
        raise FoliationError("chart link is singular")
    return T, np.array(offs)


# ---------------------------------------------------------------------------
# Jacobi matrix


def _outer_space(values) -> tuple[int, int]:
    for v in values:
        if isinstance(v, ad.Jet):
            return v.nvars, v.order
    return 0, 0


def jacobian_at(fol: FoliationMap, r, f: Sequence) -> tuple[list[list], list]:
    """Jacobi matrix ``A[i][0] = dx^i/dr``, ``A[i][j] = dx^i/df^{j+1}`` and the ``x^i``.

    Inputs may be floats or jets over some outer variables; derivatives with
    respect to ``(r, f)`` are taken on extra perturbation variables, so the
    outputs keep the outer jet order.
    """
    n = fol.n
    if len(f) != n - 1:
        raise FoliationError(f"expected {n - 1} leaf coordinates")
    m, K = _outer_space([r, *f])
    nv = m + n
    order = K + 1
    inputs = []
    for k, v in enumerate([r, *f]):
        if isinstance(v, ad.Jet):
            base = v.embed(nv, 0, order)
        else:
            base = ad.Jet.constant(ad.get_space(nv, order), float(v))
        c = np.zeros(base.space.size, dtype=base.c.dtype)
        c[base.space.unit(m + k)] = 1.0
        inputs.append(ad.Jet(base.space, base.c + c))
    A = []
    xs = []
    try:
        for xi in fol.x:
            val = xi(inputs[0], inputs[1:])
            if not isinstance(val, ad.Jet):
                val = ad.Jet.constant(ad.get_space(nv, order), val)
            row = [_outer(val.partial(m + k), m, K) for k in range(n)]
            A.append(row)
            xs.append(_outer(val.truncate(K), m, K))
    except (ad.DomainError, exprlang.ExprEvalError) as exc:
        raise FoliationError(f"foliation map undefined at this point: {exc}") from exc
    return A, xs


def _outer(j: ad.Jet, m: int, K: int):
    j = j.restrict(m)
    if m == 0:
        return float(np.real(j.value)) if not np.iscomplexobj(j.c) else complex(j.value)
    return j.truncate(K) if j.order > K else j


# ---------------------------------------------------------------------------
# combinatorial sum


@dataclass(frozen=True)
class IndexTriple:
    i: int
    J: tuple[int, ...]
    K: tuple[int, ...]
    L: tuple[int, ...]

    @property
    def p(self) -> int:
        return len(self.J)

    @property
    def q(self) -> int:
        return len(self.K)


def index_triples(n: int) -> Iterator[IndexTriple]:
    """All (i, J, K, L) with J < i < K, L in {2..n}, |J|+|K|+|L| = n-1."""
    for i in range(1, n + 1):
        for p in range(0, i):
            for J in combinations(range(1, i), p):
                for q in range(0, n - i + 1):
                    for K in combinations(range(i + 1, n + 1), q):
                        for L in combinations(range(2, n + 1), n - 1 - p - q):
                            yield IndexTriple(i, J, K, L)


def minor_det(A: Sequence[Sequence], t: IndexTriple):
    """det of A with rows J, i, K removed and f-columns L kept; 1 if L is empty."""
    n = len(A)
    used = set(t.J) | {t.i} | set(t.K)
    rows = [s for s in range(1, n + 1) if s not in used]
    if len(rows) != len(t.L):
        raise ValueError(f"non-square minor for {t}")
    if not t.L:
        return 1.0
    # column l of A (1-based) holds d/df^l; column 1 is d/dr
    return ad.det([[A[s - 1][l - 1] for l in t.L] for s in rows])


def term_sign(n: int, J: Sequence[int], K: Sequence[int], i: int = 1) -> tuple[int, int]:
    """Exponent S of (-1)^S and the power p+q of i for one term of the sum.

    S counts the transpositions that bring ``dr`` (factor i) to the front and
    the df factors ahead of the dphi factors: the inversion count
    ``nq - sum K + np - sum J - q(q-1)/2 - p(p-1)/2 - p(q+1)`` plus ``i - 1``.
    """
    p, q = len(J), len(K)
    S = n * q - sum(K) + n * p - sum(J) - q * (q - 1) // 2 - p * (p - 1) // 2 - p * (q + 1)
    return S + (i - 1), p + q


_I_POWERS = (1, 1j, -1, -1j)


def _base_index(n: int, kind: str, k: int) -> int:
    # f^k -> k - 2, phi^k -> n - 2 + k
    return k - 2 if kind == "f" else n - 2 + k


def extract_special_form(fol: FoliationMap, r, u: Sequence) -> FormValue:
    """The complex (n-1)-form ``omega`` at ``(r, u)`` via the closed sum."""
    n = fol.n
    f, phi = list(u[: n - 1]), list(u[n - 1 :])
    A, x = jacobian_at(fol, r, f)
    pref = ad.exp(x[0]) * ad.expi(phi[0]) / ad.power(r, n - 1)
    acc: dict[tuple[int, ...], object] = {}
    for t in index_triples(n):
        a_i = A[t.i - 1][0]
        if not isinstance(a_i, ad.Jet) and a_i == 0:
            continue
        S, ipow = term_sign(n, t.J, t.K, t.i)
        factor = (-1) ** (S % 2) * _I_POWERS[ipow % 4]
        term = a_i * minor_det(A, t) * factor
        key = tuple(_base_index(n, "f", l) for l in t.L) + tuple(_base_index(n, "phi", j) for j in t.J + t.K)
        acc[key] = acc[key] + term if key in acc else term
    out = FormValue(fol.base_dim, n - 1, acc)
    return out * pref


def direct_expansion_oracle(fol: FoliationMap, r, u: Sequence) -> tuple[FormValue, FormValue, FormValue]:
    """Brute-force ``Omega`` in the cone coframe (dr, df, dphi).

    Returns ``(Omega, omega_direct, Omega_without_dr)``; ``omega_direct`` is the
    dr-part of Omega with dr removed, divided by ``r^{n-1}``.
    """
    n = fol.n
    dim = 2 * n
    f, phi = list(u[: n - 1]), list(u[n - 1 :])
    A, x = jacobian_at(fol, r, f)
    factors = []
    for i in range(n):
        comps = [0.0] * dim
        comps[0] = A[i][0]
        for j in range(1, n):
            comps[j] = A[i][j]
        comps[n + i] = 1j
        factors.append(one_form(comps))
    omega_cone = wedge_all(factors) * (ad.exp(x[0]) * ad.expi(phi[0]))
    rn1 = ad.power(r, n - 1)
    with_dr = {}
    without_dr = {}
    for key, v in omega_cone.coeffs.items():
        if key[0] == 0:
            with_dr[tuple(k - 1 for k in key[1:])] = v / rn1
        else:
            without_dr[tuple(k - 1 for k in key)] = v
    base = dim - 1
    return omega_cone, FormValue(base, n - 1, with_dr), FormValue(base, n, without_dr)


def volume_identity_residual(fol: FoliationMap, r: float, u: Sequence[float]) -> float:
    """``|Omega - r^{n-1} dr ^ omega - (r^n/n) d omega| / |Omega|`` (coefficient norm)."""
    n = fol.n
    dim = 2 * n
    omega = extract_special_form(fol, float(r), ad.seed_all(u, 2))
    d_omega = ext_deriv_at(omega).values()
    omega = omega.values()
    Omega, _, _ = direct_expansion_oracle(fol, float(r), list(u))
    dr = FormValue.basis(dim, 0)
    rhs = wedge(dr, omega.shifted(dim, 1)) * r ** (n - 1) + d_omega.shifted(dim, 1) * (r**n / n)
    diff = (Omega.values() - rhs).vector()
    return float(np.linalg.norm(diff) / np.linalg.norm(Omega.values().vector()))


def reeb_vector(fol: FoliationMap, u: Sequence[float], r: float = 1.0) -> np.ndarray:
    """``J(r d/dr)`` in foliated base coordinates: ``sum_i r dx^i/dr d/dphi^i``."""
    n = fol.n
    A, _ = jacobian_at(fol, r, list(u[: n - 1]))
    xi = np.zeros(fol.base_dim)
    for i in range(n):
        xi[n - 1 + i] = r * float(np.real(A[i][0]))
    return xi


def reeb_vector_chart(fol: FoliationMap, u: Sequence[float], r: float = 1.0) -> np.ndarray:
    """Reeb components on the chart coordinate vectors."""
    return np.linalg.solve(fol.T, reeb_vector(fol, u, r))


def special_form_field(fol: FoliationMap, part: str = "complex", r: float = 1.0, chart: bool = True) -> FormField:
    """``omega`` (or its real/imaginary part) as a field.

    With ``chart=True`` the field lives on the chart coordinates linked by
    ``fol.T``; otherwise on the foliated base coordinates ``(f, phi)``.
    """
    if part not in ("complex", "real", "imag"):
        raise ValueError("part must be complex, real or imag")

    def pick(F: FormValue) -> FormValue:
        if part == "real":
            return F.real()
        if part == "imag":
            return F.imag()
        return F

    if chart:
        if fol.T is None:
            raise FoliationError("foliation has no chart link")
        T = fol.T

        def func(X):
            return pick(pullback_linear(extract_special_form(fol, r, fol.to_foliated(X)), T))

    else:

        def func(X):
            return pick(extract_special_form(fol, r, X))

    names = {"complex": "omega", "real": "Xi", "imag": "Upsilon"}
    return FormField(fol.base_dim, fol.n - 1, func, names[part])
