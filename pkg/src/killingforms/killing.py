"""Residual checks for conformal Killing, Killing, special Killing and parallel forms.

Every residual is normalized by ``1 + ||F||_g`` at the point, and directions
run over the coordinate vectors ``d/dx^k``.  Fields are evaluated on jets of
order ``FIELD_ORDER`` so that second derivatives of derived fields (such as
``d(eta)``) are available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .exterior import FormField, FormValue, ext_deriv_at, form_inner, form_norm, from_dense, one_form, to_dense, wedge
from .geometry import Chart, LocalGeometry, codifferential_dense, covariant_derivative, interior_dense, local_geometry

FIELD_ORDER = 3


@dataclass
class KillingVerdict:
    equation: str
    max_residual: float
    tolerance: float
    samples: int
    seed: int | None = None
    c: float | None = None
    c_spread: float | None = None

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual)) and self.max_residual < self.tolerance

    def as_dict(self) -> dict:
        out = {"name": self.equation, "max_residual": self.max_residual, "tolerance": self.tolerance}
        if self.c is not None:
            out["c"] = self.c
            out["c_spread"] = self.c_spread
        out["pass"] = self.passed
        return out


class FormAtPoint:
    """Value, covariant derivative, d and d* of a field at one point."""

    def __init__(self, chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER, geo: LocalGeometry | None = None):
        self.geo = geo or local_geometry(chart, point)
        self.n = F.dim
        self.p = F.degree
        self.jets = F.at(point, order)
        self.dense = to_dense(self.jets)
        self.nabla = covariant_derivative(self.jets, self.geo)
        self.d_jets = ext_deriv_at(self.jets)
        self.d_dense = to_dense(self.d_jets)
        self.codiff = codifferential_dense(self.nabla, self.geo) if self.p >= 1 else None

    def norm(self, A: np.ndarray, degree: int) -> float:
        return form_norm(self.geo.ginv, from_dense(A, self.n, degree))

    @property
    def size(self) -> float:
        return self.norm(self.dense, self.p)

    def coframe(self, k: int) -> FormValue:
        """``(d/dx^k)^flat`` as a 1-form."""
        return one_form(list(self.geo.g[k]))

    def lowered_wedge(self, k: int, A: np.ndarray, degree: int) -> np.ndarray:
        return to_dense(wedge(self.coframe(k), from_dense(A, self.n, degree)))


def cky_defects(fp: FormAtPoint) -> list[np.ndarray]:
    n, p = fp.n, fp.p
    out = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        R = fp.nabla[k] - interior_dense(e, fp.d_dense) / (p + 1)
        R = R + fp.lowered_wedge(k, fp.codiff, p - 1) / (n - p + 1)
        out.append(R)
    return out


def cky_residual(chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER) -> float:
    if not 1 <= F.degree <= F.dim - 1:
        raise ValueError("conformal Killing equation needs 1 <= p <= n-1")
    fp = FormAtPoint(chart, F, point, order)
    return _cky(fp)


def _cky(fp: FormAtPoint) -> float:
    scale = 1.0 + fp.size
    return max(fp.norm(R, fp.p) for R in cky_defects(fp)) / scale


def _direct(fp: FormAtPoint) -> float:
    n, p = fp.n, fp.p
    worst = 0.0
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        R = fp.nabla[k] - interior_dense(e, fp.d_dense) / (p + 1)
        worst = max(worst, fp.norm(R, p))
    return worst / (1.0 + fp.size)


def killing_residuals(chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER) -> tuple[float, float]:
    """Both formulations: (CKY + coclosed, and nabla_X F = X _| dF / (p+1))."""
    fp = FormAtPoint(chart, F, point, order)
    coclosed = fp.norm(fp.codiff, fp.p - 1) / (1.0 + fp.size)
    return max(_cky(fp), coclosed), _direct(fp)


def killing_residual(chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER) -> float:
    return killing_residuals(chart, F, point, order)[0]


def closed_residual(chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER) -> float:
    fp = FormAtPoint(chart, F, point, order)
    return fp.norm(fp.d_dense, fp.p + 1) / (1.0 + fp.size)


def special_killing_fit(chart: Chart, F: FormField, points: Iterable[Sequence[float]], order: int = FIELD_ORDER):
    """Least-squares constant c in ``nabla_X dF = c X^flat ^ F``.

    Returns ``(c, max_residual, spread)``, where ``spread`` is the largest
    relative deviation of the per-point fits from the global c.
    """
    per_point = []
    num = den = 0.0
    for pt in points:
        geo = local_geometry(chart, pt)
        fp = FormAtPoint(chart, F, pt, order, geo)
        nab_dF = covariant_derivative(fp.d_jets, geo)
        A = [from_dense(nab_dF[k], fp.n, fp.p + 1) for k in range(fp.n)]
        B = [wedge(fp.coframe(k), fp.jets.values()) for k in range(fp.n)]
        pn = sum(form_inner(geo.ginv, a, b).real for a, b in zip(A, B))
        pd = sum(form_inner(geo.ginv, b, b).real for b in B)
        num += pn
        den += pd
        per_point.append((A, B, geo, fp.size, pn, pd))
    if den <= 1e-300:
        raise ValueError("degenerate fit: the form vanishes on all samples")
    c = num / den
    worst = 0.0
    spread = 0.0
    for A, B, geo, size, pn, pd in per_point:
        for a, b in zip(A, B):
            worst = max(worst, form_norm(geo.ginv, a - b * c) / (1.0 + size))
        if pd > 0:
            spread = max(spread, abs(pn / pd - c) / max(abs(c), 1e-300))
    return c, worst, spread


def parallel_residual(chart: Chart, F: FormField, point: Sequence[float], order: int = FIELD_ORDER) -> float:
    """``|nabla F|_g / (1 + |F|_g)`` summed over an orthonormal frame."""
    fp = FormAtPoint(chart, F, point, order)
    total = 0.0
    for e in fp.geo.frame():
        total += fp.norm(np.tensordot(e, fp.nabla, axes=(0, 0)), fp.p) ** 2
    return float(np.sqrt(total)) / (1.0 + fp.size)


def semmelmann_lift(F: FormField, p: int | None = None) -> FormField:
    """``r^p dr ^ F + r^(p+1)/(p+1) dF`` on the cone, r being coordinate 0."""
    p = F.degree if p is None else p
    if p != F.degree:
        raise ValueError("lift degree must equal the form degree")
    n = F.dim

    def func(X):
        r, base = X[0], X[1:]
        Fv = F(base)
        dF = ext_deriv_at(Fv, [ad.coordinate_variable(x) for x in base])
        dr = FormValue.basis(n + 1, 0)
        tangential = dF.shifted(n + 1, 1) * (ad.power(r, p + 1) / (p + 1))
        radial = wedge(dr, Fv.shifted(n + 1, 1)) * ad.power(r, p)
        return radial + tangential

    return FormField(n + 1, p + 1, func, f"lift({F.name})")


def r_independence_residual(form_at_r: Callable[[float], FormValue], radii: Sequence[float]) -> float:
    """Largest coefficient change of ``form_at_r`` across ``radii``.

    Uses the Euclidean coefficient norm, relative to ``1 + ||F||``.
    """
    forms = [form_at_r(r).values() for r in radii]
    worst = 0.0
    for i in range(len(forms)):
        for j in range(i + 1, len(forms)):
            diff = np.linalg.norm(forms[i].vector() - forms[j].vector())
            worst = max(worst, diff / (1.0 + np.linalg.norm(forms[i].vector())))
    return float(worst)


def max_over(points: Iterable[Sequence[float]], f: Callable[[Sequence[float]], float]) -> float:
    worst = 0.0
    for pt in points:
        v = f(pt)
        if not np.isfinite(v):
            return float("nan")
        worst = max(worst, v)
    return worst
