"""Charts, Levi-Civita connection, curvature, codifferential and metric cones."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import exprlang
from .exterior import FormField, FormValue, ext_deriv_at, from_dense, interior, to_dense

DEFAULT_MARGIN = 0.05
DEFAULT_CONE_RANGE = (0.5, 2.0)


class ChartError(ValueError):
    pass


class NotPositiveDefinite(ChartError):
    pass


@dataclass(frozen=True)
class Chart:
    """A coordinate patch with a metric given as ``metric(coords) -> n x n``.

    ``domain`` maps each coordinate to an open interval; ``predicate`` is an
    optional extra admissibility test on the numeric point.  ``sampling``
    optionally narrows the box used by :meth:`sample` (the cone samples a
    finite radial range of its unbounded r domain).
    """

    name: str
    coords: tuple[str, ...]
    metric: Callable[[Sequence], list[list]]
    domain: Mapping[str, tuple[float, float]]
    params: Mapping[str, float] = field(default_factory=dict)
    predicate: Callable[[np.ndarray], bool] | None = None
    sampling: Mapping[str, tuple[float, float]] | None = None

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def contains(self, point: Sequence[float]) -> bool:
        for c, x in zip(self.coords, point):
            lo, hi = self.domain[c]
            if not lo < x < hi:
                return False
        return self.predicate is None or bool(self.predicate(np.asarray(point, float)))

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
        """Uniform points in the (shrunk) admissible box."""
        box = {**self.domain, **(self.sampling or {})}
        lo = np.array([box[c][0] for c in self.coords]) + margin
        hi = np.array([box[c][1] for c in self.coords]) - margin
        out = []
        while len(out) < count:
            p = rng.uniform(lo, hi)
            if self.contains(p):
                out.append(p)
        return np.array(out).reshape(count, self.dim)

    @classmethod
    def from_exprs(
        cls,
        name: str,
        coords: Sequence[str],
        entries: Mapping[tuple[int, int], str],
        domain: Mapping[str, tuple[float, float]],
        params: Mapping[str, float] | None = None,
        predicate=None,
    ) -> "Chart":
        """Metric from upper-triangle expression strings; missing entries are 0."""
        coords = tuple(coords)
        params = dict(params or {})
        n = len(coords)
        compiled = {}
        for (i, j), src in entries.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ChartError(f"metric entry ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            compiled[key] = exprlang.compile_expr(src, list(coords), params)

        def metric(X):
            g = [[0.0] * n for _ in range(n)]
            for (i, j), f in compiled.items():
                v = f(X)
                g[i][j] = v
                g[j][i] = v
            return g

        missing = set(coords) - set(domain)
        if missing:
            raise ChartError(f"no domain given for {sorted(missing)}")
        return cls(name, coords, metric, dict(domain), params, predicate)

    @classmethod
    def from_json(cls, source: str | Path | Mapping) -> "Chart":
        data = source if isinstance(source, Mapping) else json.loads(Path(source).read_text(encoding="utf-8"))
        try:
            coords = data["coords"]
            if "dim" in data and data["dim"] != len(coords):
                raise ChartError("dim does not match the number of coordinates")
            entries = {}
            for key, src in data["metric"].items():
                i, j = (int(s) for s in key.split(","))
                entries[(i, j)] = src
            domain = {k: tuple(v) for k, v in data["domain"].items()}
            return cls.from_exprs(data.get("name", "chart"), coords, entries, domain, data.get("params", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ChartError(f"invalid chart definition: {exc}") from exc


def flat_chart(dim: int, lo: float = -1.0, hi: float = 1.0, name: str | None = None) -> Chart:
    coords = tuple(f"x{i + 1}" for i in range(dim))

    def metric(X):
        return [[1.0 if i == j else 0.0 for j in range(dim)] for i in range(dim)]

    return Chart(name or f"flat{dim}", coords, metric, {c: (lo, hi) for c in coords})


def sphere2_chart(radius: float = 1.0) -> Chart:
    return Chart.from_exprs(
        "sphere2",
        ("theta", "phi"),
        {(0, 0): "R^2", (1, 1): "R^2*sin(theta)^2"},
        {"theta": (0.0, np.pi), "phi": (0.0, 2 * np.pi)},
        {"R": radius},
    )


# ---------------------------------------------------------------------------
# metric and connection at a point


def _jet_arrays(m: list[list], n: int, order: int):
    val = np.zeros((n, n))
    d1 = np.zeros((n, n, n)) if order >= 1 else None
    d2 = np.zeros((n, n, n, n)) if order >= 2 else None
    for i in range(n):
        for j in range(n):
            e = m[i][j]
            if isinstance(e, ad.Jet):
                val[i, j] = np.real(e.value)
                if order >= 1:
                    d1[:, i, j] = np.real(e.grad)
                if order >= 2:
                    d2[:, :, i, j] = np.real(e.hess)
            else:
                val[i, j] = e
    return val, d1, d2


def metric_at(chart: Chart, point: Sequence[float], order: int = 2):
    """Metric jets and the numeric inverse at ``point``."""
    point = np.asarray(point, float)
    if not chart.contains(point):
        raise ChartError(f"point {point.tolist()} outside the domain of {chart.name}")
    g = chart.metric(ad.seed_all(point, order))
    val, _, _ = _jet_arrays(g, chart.dim, 0)
    try:
        np.linalg.cholesky(val)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"metric of {chart.name} is not positive definite at {point.tolist()}") from None
    return g, np.linalg.inv(val)


@dataclass
class LocalGeometry:
    """Metric data, Christoffel symbols and their first derivatives at a point."""

    point: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray  # dg[l, i, j] = d_l g_ij
    ddg: np.ndarray  # ddg[l, m, i, j]
    gamma: np.ndarray  # gamma[k, i, j] = Gamma^k_ij
    dgamma: np.ndarray  # dgamma[m, k, i, j] = d_m Gamma^k_ij

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def frame(self) -> np.ndarray:
        """Rows are a g-orthonormal frame e_a; built from g_inv = L L^T."""
        return np.linalg.cholesky(self.ginv).T

    def metricity_residual(self) -> float:
        nab = self.dg - np.einsum("lki,lj->kij", self.gamma, self.g) - np.einsum("lkj,il->kij", self.gamma, self.g)
        return float(np.max(np.abs(nab)))

    def ricci(self) -> np.ndarray:
        G, dG = self.gamma, self.dgamma
        return (
            np.einsum("kkij->ij", dG)
            - np.einsum("jkik->ij", dG)
            + np.einsum("kkl,lij->ij", G, G)
            - np.einsum("kjl,lik->ij", G, G)
        )


def local_geometry(chart: Chart, point: Sequence[float]) -> LocalGeometry:
    g_jets, ginv = metric_at(chart, point, 2)
    g, dg, ddg = _jet_arrays(g_jets, chart.dim, 2)
    first = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)  # [l, i, j]
    gamma = np.einsum("kl,lij->kij", ginv, first)
    dfirst = 0.5 * (np.einsum("mijl->mlij", ddg) + np.einsum("mjil->mlij", ddg) - ddg)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dgamma = np.einsum("mkl,lij->mkij", dginv, first) + np.einsum("kl,mlij->mkij", ginv, dfirst)
    return LocalGeometry(np.asarray(point, float), g, ginv, dg, ddg, gamma, dgamma)


def christoffels(chart: Chart, point: Sequence[float]) -> np.ndarray:
    return local_geometry(chart, point).gamma


def ricci(chart: Chart, point: Sequence[float]) -> np.ndarray:
    return local_geometry(chart, point).ricci()


def einstein_residual(chart: Chart, point: Sequence[float], lam: float) -> float:
    """``||Ric - lam g|| / ||g||`` in the Frobenius norm."""
    geo = local_geometry(chart, point)
    return float(np.linalg.norm(geo.ricci() - lam * geo.g) / np.linalg.norm(geo.g))


# ---------------------------------------------------------------------------
# forms


def covariant_derivative(F: FormValue, geo: LocalGeometry, variables: Sequence[int] | None = None) -> np.ndarray:
    """Dense ``(nabla_i F)_{j1..jp}`` with the derivative index first.

    ``F`` carries jet coefficients of order >= 1; ``variables[k]`` is the jet
    variable of coordinate ``k``.
    """
    n, p = F.dim, F.degree
    variables = list(range(n)) if variables is None else list(variables)
    partial = np.zeros((n,) * (p + 1), dtype=complex)
    for i in range(n):
        comp = FormValue(n, p, {k: c.partial(variables[i]) for k, c in F.coeffs.items() if isinstance(c, ad.Jet)})
        partial[i] = to_dense(comp)
    A = to_dense(F)
    out = partial
    for s in range(p):
        # Gamma^m_{i j_s} A_{.. m ..}: contract m with slot s, then put (i, j_s) in place
        t = np.tensordot(geo.gamma, A, axes=([0], [s]))  # [i, j_s, rest...]
        t = np.moveaxis(t, 1, 1 + s)
        out = out - t
    return out


def cov_deriv_form(chart: Chart, F: FormField, point: Sequence[float], order: int = 2) -> list[FormValue]:
    geo = local_geometry(chart, point)
    nab = covariant_derivative(F.at(point, order), geo)
    return [from_dense(nab[i], F.dim, F.degree) for i in range(F.dim)]


def codifferential_dense(nabla: np.ndarray, geo: LocalGeometry, frame: np.ndarray | None = None) -> np.ndarray:
    """``d*F = -sum_a e_a _| nabla_{e_a} F`` from the dense covariant derivative."""
    E = geo.frame() if frame is None else frame
    p = nabla.ndim - 1
    if p < 1:
        raise ValueError("codifferential of a 0-form")
    out = 0
    for e in E:
        nab_e = np.tensordot(e, nabla, axes=(0, 0))
        out = out - np.tensordot(e, nab_e, axes=(0, 0))
    return np.asarray(out, dtype=complex)


def codifferential(chart: Chart, F: FormField, point: Sequence[float], frame: np.ndarray | None = None, order: int = 2) -> FormValue:
    if F.degree < 1:
        raise ValueError("codifferential of a 0-form")
    geo = local_geometry(chart, point)
    nab = covariant_derivative(F.at(point, order), geo)
    return from_dense(codifferential_dense(nab, geo, frame), F.dim, F.degree - 1)


def flat(v: Sequence, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    v = np.asarray(v)
    if g.shape != (len(v), len(v)):
        raise ValueError("vector and metric dimensions differ")
    return g @ v


def sharp(alpha: Sequence, g_inv: np.ndarray) -> np.ndarray:
    g_inv = np.asarray(g_inv)
    alpha = np.asarray(alpha)
    if g_inv.shape != (len(alpha), len(alpha)):
        raise ValueError("form and metric dimensions differ")
    return g_inv @ alpha


def flat_jets(v: Sequence, g: list[list]) -> list:
    """Index lowering with jet-valued metric entries."""
    n = len(v)
    out = []
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if v[j] != 0:
                acc = acc + g[i][j] * v[j]
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# metric cone


def cone_extend(chart: Chart, r_range: tuple[float, float] = DEFAULT_CONE_RANGE) -> Chart:
    """``dr^2 + r^2 g`` on ``(0, inf) x M``; ``r`` is coordinate 0."""
    n = chart.dim

    def metric(X):
        r = X[0]
        base = chart.metric(X[1:])
        r2 = r * r
        g = [[0.0] * (n + 1) for _ in range(n + 1)]
        g[0][0] = 1.0
        for i in range(n):
            for j in range(n):
                b = base[i][j]
                if isinstance(b, ad.Jet) or b != 0:
                    g[i + 1][j + 1] = r2 * b
        return g

    domain = {"r": (0.0, np.inf), **chart.domain}
    sampling = {"r": tuple(r_range), **(chart.sampling or {})}
    pred = None
    if chart.predicate is not None:
        pred = lambda p: chart.predicate(p[1:])  # noqa: E731
    return Chart(f"cone({chart.name})", ("r",) + chart.coords, metric, domain, chart.params, pred, sampling)


def cone_extend_field(F: FormField) -> FormField:
    """Pull a base field back to the cone: r-independent, no dr component."""
    return FormField(F.dim + 1, F.degree, lambda X: F(X[1:]).shifted(F.dim + 1, 1), f"cone({F.name})")


def ext_deriv_cone_base(F: FormValue, X: Sequence) -> FormValue:
    """Exterior derivative of a base form evaluated on cone seeds ``X[1:]``."""
    return ext_deriv_at(F, [ad.coordinate_variable(x) for x in X])


def interior_dense(v: Sequence, A: np.ndarray) -> np.ndarray:
    return np.tensordot(np.asarray(v), A, axes=(0, 0))


__all__ = [
    "Chart",
    "ChartError",
    "NotPositiveDefinite",
    "LocalGeometry",
    "metric_at",
    "local_geometry",
    "christoffels",
    "ricci",
    "einstein_residual",
    "covariant_derivative",
    "cov_deriv_form",
    "codifferential",
    "codifferential_dense",
    "flat",
    "sharp",
    "flat_jets",
    "cone_extend",
    "cone_extend_field",
    "flat_chart",
    "sphere2_chart",
    "interior",
]
