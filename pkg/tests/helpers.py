"""Shared generators for the test suite."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from killingforms import autodiff as ad
from killingforms import toric
from killingforms.exterior import FormField, FormValue

# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

_F_TERMS = (
    "{a}*{f}",
    "{a}*{f}^2",
    "{a}*sin({b}*{f})",
    "{a}*cos({b}*{f} + {c})",
    "{a}*{f}*{g}",
    "{a}*exp({b}*{f})",
    "{a}*ln(1 + {f}^2)",
)
_R_TERMS = ("{a}*ln(r)", "{a}*r", "{a}*r*{f}", "{a}*sin(r)*{f}", "{a}*r^2")


def _fill(rng, template: str, names) -> str:
    f, g = rng.choice(names, 2)
    a, b, c = rng.uniform(-1.5, 1.5, 3)
    return template.format(a=f"({a:.6f})", b=f"({b:.6f})", c=f"({c:.6f})", f=f, g=g)


def random_foliation(rng: np.random.Generator, n: int, homogeneous: bool = False) -> toric.FoliationMap:
    """Random polynomial-trig maps ``x^i(r, f)``.

    With ``homogeneous=True`` only ``x^1`` depends on r, as ``n ln r``; that is
    the setting in which Omega splits into a cone lift of a base form.
    """
    f_names = [f"f{k}" for k in range(2, n + 1)]
    pool = f_names or ["r"]
    xs = []
    for i in range(n):
        terms = [_fill(rng, rng.choice(_F_TERMS), pool) for _ in range(3)] if f_names else ["0"]
        if homogeneous:
            if i == 0:
                terms.append(f"{n}*ln(r)")
        else:
            terms.append(f"{n if i == 0 else rng.uniform(0.2, 2.0):.6f}*ln(r)")
            terms.append(_fill(rng, rng.choice(_R_TERMS), pool))
        xs.append(" + ".join(terms))
    return toric.FoliationMap.from_exprs(xs, f_names, [f"phi{k}" for k in range(1, n + 1)])


def random_base_point(rng: np.random.Generator, n: int) -> list[float]:
    return list(rng.uniform(0.2, 1.2, n - 1)) + list(rng.uniform(0.0, 2 * np.pi, n))


def random_form(rng: np.random.Generator, dim: int, degree: int, complex_: bool = False) -> FormValue:
    coeffs = {}
    for idx in combinations(range(dim), degree):
        v = rng.normal()
        if complex_:
            v = v + 1j * rng.normal()
        coeffs[idx] = v
    return FormValue(dim, degree, coeffs)


def random_field(rng: np.random.Generator, dim: int, degree: int) -> FormField:
    """Polynomial-trig coefficients built from seeded coordinates."""
    idxs = list(combinations(range(dim), degree))
    params = {idx: (rng.integers(0, dim, 3), rng.normal(size=4)) for idx in idxs}

    def func(X):
        out = {}
        for idx, ((i, j, k), c) in params.items():
            out[idx] = c[0] + c[1] * X[i] * X[j] + c[2] * ad.sin(X[k] * c[3]) + c[3] * ad.exp(X[j] * 0.3)
        return FormValue(dim, degree, out)

    return FormField(dim, degree, func, "random")
