"""The five-dimensional Sasaki-Einstein family Y^{p,q} (local form, c = 1).

Chart coordinates are ``(theta, phi, y, psi, alpha)``.  The toric complex
coordinates use the primed angles ``psi' = psi``, ``phi' = phi/(3 sqrt 3)`` and
``beta' = -alpha - psi/6``; the leaf coordinates are ``(theta, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from . import autodiff as ad
from .exterior import FormField, FormValue, ext_deriv_at, one_form, pullback_linear, wedge
from .geometry import Chart, flat_jets, local_geometry, metric_at
from .toric import FoliationMap, reeb_vector_chart

COORDS = ("theta", "phi", "y", "psi", "alpha")
SQRT3 = math.sqrt(3.0)

# auxiliary functions of y as expression strings
W = "(2*(a - y^2)/(1 - y))"
Q = "((a - 3*y^2 + 2*y^3)/(a - y^2))"
P = "(2*(a - 3*y^2 + 2*y^3)/(1 - y))"
F_MIX = "((a - 2*y + y^2)/(6*(a - y^2)))"


class YpqParamError(ValueError):
    pass


def cubic(a: float, y: float) -> float:
    return a - 3 * y**2 + 2 * y**3


def cubic_roots(a: float) -> tuple[float, float, float]:
    """Roots of ``a - 3y^2 + 2y^3`` for 0 < a < 1, ascending (y1 < 0 < y2 < y3).

    The cubic is -(1-a) at y = -1/2 and y = 1, positive at 0 and 3/2, which
    brackets each root.
    """
    if not 0.0 < a < 1.0:
        raise YpqParamError(f"a must lie in (0, 1), got {a}")
    f = lambda y: cubic(a, y)  # noqa: E731
    kw = dict(xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    y1 = brentq(f, -0.5, 0.0, **kw)
    y2 = brentq(f, 0.0, 1.0, **kw)
    y3 = brentq(f, 1.0, 1.5, **kw)
    return y1, y2, y3


@dataclass(frozen=True)
class YpqParams:
    a: float = 0.5
    delta_theta: float = 0.05
    delta_y: float = 0.05
    roots: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "roots", cubic_roots(self.a))
        y1, y2, _ = self.roots
        if y2 - y1 <= 2 * self.delta_y:
            raise YpqParamError("y margin leaves an empty interval")

    @property
    def binding(self) -> dict[str, float]:
        y1, y2, y3 = self.roots
        return {"a": self.a, "y1": y1, "y2": y2, "y3": y3}

    @property
    def domain(self) -> dict[str, tuple[float, float]]:
        y1, y2, _ = self.roots
        two_pi = 2 * math.pi
        return {
            "theta": (self.delta_theta, math.pi - self.delta_theta),
            "phi": (0.0, two_pi),
            "y": (y1 + self.delta_y, y2 - self.delta_y),
            "psi": (0.0, two_pi),
            "alpha": (0.0, two_pi),
        }


def aux_functions(a: float, y):
    """``(w, q, p)`` at ``y``; ``p`` uses the ``1 - y`` denominator."""
    w = 2 * (a - y * y) / (1 - y)
    q = (a - 3 * y * y + 2 * y * y * y) / (a - y * y)
    p = 2 * (a - 3 * y * y + 2 * y * y * y) / (1 - y)
    return w, q, p


METRIC_ENTRIES = {
    (0, 0): "(1 - y)/6",
    (1, 1): f"(1 - y)/6*sin(theta)^2 + ({Q}/9 + {W}*{F_MIX}^2)*cos(theta)^2",
    (2, 2): f"1/({W}*{Q})",
    (3, 3): f"{Q}/9 + {W}*{F_MIX}^2",
    (4, 4): W,
    (1, 3): f"-({Q}/9 + {W}*{F_MIX}^2)*cos(theta)",
    (1, 4): f"-{W}*{F_MIX}*cos(theta)",
    (3, 4): f"{W}*{F_MIX}",
}


def ypq_chart(params: YpqParams) -> Chart:
    return Chart.from_exprs(f"ypq(a={params.a})", COORDS, METRIC_ENTRIES, params.domain, params.binding)


# x^i(r, theta, y); z^3 uses the per-root exponent -1/(12 y_i)
FOLIATION_X = (
    f"3*ln(r) + ln(sin(theta)) + 0.5*ln({P}*(1 - y)/2)",
    "ln(tan(theta/2))/(3*sqrt(3))",
    "-ln(sin(theta))/6 - (ln(y - y1)/y1 + ln(y2 - y)/y2 + ln(y3 - y)/y3)/12",
)
ANGLE_LINK = {"theta": "theta", "y": "y", "psi_p": "psi", "phi_p": "phi/(3*sqrt(3))", "beta_p": "-alpha - psi/6"}


def ypq_foliation(params: YpqParams) -> FoliationMap:
    return FoliationMap.from_exprs(
        FOLIATION_X,
        ("theta", "y"),
        ("psi_p", "phi_p", "beta_p"),
        params.binding,
        COORDS,
        ANGLE_LINK,
    )


def dz_display(params: YpqParams, theta: float, y: float, r: float = 1.0) -> np.ndarray:
    """Printed dz coefficients: rows z^1..z^3, columns (dr, dtheta, dy)."""
    _, _, p = aux_functions(params.a, y)
    cot = math.cos(theta) / math.sin(theta)
    return np.array(
        [
            [3 / r, cot, -6 * y / p],
            [0.0, 1 / (3 * SQRT3 * math.sin(theta)), 0.0],
            [0.0, -cot / 6, 1 / p],
        ]
    )


def printed_minors(params: YpqParams, theta: float, y: float) -> dict[tuple, float]:
    """The six minors of the worked example, keyed by (i, J, K, L)."""
    _, _, p = aux_functions(params.a, y)
    s, c = math.sin(theta), math.cos(theta)
    return {
        (1, (), (), (2, 3)): 1 / (3 * SQRT3 * s * p),
        (1, (), (2,), (2,)): -c / (6 * s),
        (1, (), (2,), (3,)): 1 / p,
        (1, (), (3,), (2,)): 1 / (3 * SQRT3 * s),
        (1, (), (3,), (3,)): 0.0,
        (1, (), (2, 3), ()): 1.0,
    }


# primed coframe ordering (dtheta, dy, dpsi', dphi', dbeta') matches the
# foliated base coordinates of ypq_foliation
_TH, _Y, _PSI, _PHI, _BETA = range(5)


def _closed_form_primed(params: YpqParams, theta, y, psi) -> tuple[FormValue, FormValue]:
    a = params.a
    _, _, p = aux_functions(a, y)
    s = ad.sqrt((1 - y) / (6 * p))
    st, ct = ad.sin(theta), ad.cos(theta)
    cp, sp = ad.cos(psi), ad.sin(psi)

    def two(i, j, v):
        return FormValue.basis(5, i, j) * v

    # the two brackets of the displayed real/imaginary decomposition
    first = two(_Y, _TH, -1.0) + two(_BETA, _PHI, 3 * SQRT3 * p * st)
    second = two(_Y, _PHI, -3 * SQRT3 * st) + two(_BETA, _TH, -p) + two(_TH, _PHI, (SQRT3 / 2) * ct * p)
    xi = (first * cp - second * sp) * s
    upsilon = (second * cp + first * sp) * s
    return xi, upsilon


def closed_form_xi_upsilon(params: YpqParams, point, primed: bool = False) -> tuple[FormValue, FormValue]:
    """Closed-form real and imaginary parts of omega at a chart point.

    ``point`` holds chart coordinates (floats or jets); with ``primed=True``
    the result stays in the primed coframe, otherwise it is pulled back to
    the chart coframe.
    """
    theta, _, y, psi, _ = point
    xi, ups = _closed_form_primed(params, theta, y, psi)
    if primed:
        return xi, ups
    T = ypq_foliation_link(params)
    return pullback_linear(xi, T), pullback_linear(ups, T)


def ypq_foliation_link(params: YpqParams) -> np.ndarray:
    return _link_matrix()


def _link_matrix() -> np.ndarray:
    T = np.zeros((5, 5))
    T[_TH, 0] = 1.0
    T[_Y, 2] = 1.0
    T[_PSI, 3] = 1.0
    T[_PHI, 1] = 1 / (3 * SQRT3)
    T[_BETA, 4] = -1.0
    T[_BETA, 3] = -1 / 6
    return T


def closed_form_fields(params: YpqParams) -> tuple[FormField, FormField]:
    xi = FormField(5, 2, lambda X: closed_form_xi_upsilon(params, X)[0], "Xi_closed")
    ups = FormField(5, 2, lambda X: closed_form_xi_upsilon(params, X)[1], "Upsilon_closed")
    return xi, ups


# ---------------------------------------------------------------------------
# Sasaki structure


class ConventionError(RuntimeError):
    """Chart and foliation disagree (the Reeb field is not unit)."""


UNIT_TOL = 1e-8


class SasakiStructure:
    """Reeb field and contact form derived from the toric complex structure."""

    def __init__(self, params: YpqParams):
        self.params = params
        self.chart = ypq_chart(params)
        self.foliation = ypq_foliation(params)

    @cached_property
    def xi(self) -> np.ndarray:
        """Reeb components on (d_theta, d_phi, d_y, d_psi, d_alpha); constant."""
        dom = self.params.domain
        mid = [sum(dom[c]) / 2 for c in COORDS]
        u = self.foliation.to_foliated(mid)
        return reeb_vector_chart(self.foliation, u)

    def reeb_norm(self, point) -> float:
        g, _ = metric_at(self.chart, point, 0)
        G = np.array([[float(np.real(ad.value_of(v))) for v in row] for row in g])
        return float(self.xi @ G @ self.xi)

    def check_unit(self, point) -> float:
        dev = abs(self.reeb_norm(point) - 1.0)
        if dev > UNIT_TOL:
            raise ConventionError(f"g(xi, xi) deviates from 1 by {dev:.3e}")
        return dev

    def killing_vector_residual(self, point) -> float:
        """``||L_xi g|| / ||g||``; the components of xi are constant, so L_xi g = xi^k d_k g."""
        geo = local_geometry(self.chart, point)
        lie = np.einsum("k,kij->ij", self.xi, geo.dg)
        return float(np.linalg.norm(lie) / np.linalg.norm(geo.g))

    def eta_at(self, X) -> FormValue:
        """``eta = xi^flat`` evaluated on coordinate scalars."""
        g = self.chart.metric(X)
        return one_form(flat_jets(list(self.xi), g))

    @property
    def eta(self) -> FormField:
        return FormField(5, 1, self.eta_at, "eta")

    def ladder(self, k: int) -> tuple[FormField, FormField | None]:
        """``(Psi_k, Phi_k) = (eta ^ (d eta)^k, (d eta)^k)``; Phi_0 is None."""
        if not 0 <= k <= 2:
            raise ValueError("k must be 0, 1 or 2 in dimension 5")

        def d_eta(X, eta):
            return ext_deriv_at(eta, [ad.coordinate_variable(x) for x in X])

        def phi_k(X):
            eta = self.eta_at(X)
            de = d_eta(X, eta)
            out = FormValue.scalar(5, 1.0)
            for _ in range(k):
                out = wedge(out, de)
            return out, eta

        def psi(X):
            pk, eta = phi_k(X)
            return wedge(eta, pk)

        Psi = FormField(5, 2 * k + 1, psi, f"Psi_{k}")
        Phi = FormField(5, 2 * k, lambda X: phi_k(X)[0], f"Phi_{k}") if k >= 1 else None
        return Psi, Phi


def reeb_contact(params: YpqParams, point) -> tuple[np.ndarray, FormValue]:
    """Reeb components and the contact form at ``point`` (unit norm verified)."""
    s = SasakiStructure(params)
    s.check_unit(point)
    return s.xi, s.eta_at(list(point))


def sasaki_ladder(params: YpqParams, k: int):
    return SasakiStructure(params).ladder(k)
