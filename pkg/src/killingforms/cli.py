"""Command-line front end: ``verify``, ``extract`` and ``roots``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import autodiff as ad
from . import exprlang, geometry, killing, toric, ypq
from .exterior import FormField, FormValue, form_inner
from .geometry import Chart, ChartError, flat_chart

GEOMETRIC_TOL = 1e-8
ALGEBRAIC_TOL = 1e-12
C_TOL = 1e-6
DEFAULT_SAMPLES = 100
DEFAULT_SEED = 42

_POINT_ERRORS = (ad.DomainError, exprlang.ExprEvalError, ChartError, toric.FoliationError, ZeroDivisionError)


class UsageError(Exception):
    """Bad parameters, files or points; exit status 2."""


@dataclass
class Check:
    name: str
    max_residual: float
    tolerance: float
    c: float | None = None
    expected_c: float | None = None
    c_spread: float | None = None
    point: list[float] | None = None
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error is not None or not math.isfinite(self.max_residual):
            return False
        if self.max_residual >= self.tolerance:
            return False
        if self.expected_c is not None:
            return self.c is not None and abs(self.c - self.expected_c) < C_TOL
        return True

    def as_dict(self) -> dict:
        out: dict = {"name": self.name, "max_residual": _num(self.max_residual), "tolerance": self.tolerance}
        if self.c is not None:
            out["c"] = self.c
            out["c_spread"] = self.c_spread
        if self.expected_c is not None:
            out["expected_c"] = self.expected_c
        if self.point is not None:
            out["point"] = self.point
        if self.error is not None:
            out["error"] = self.error
        out["pass"] = self.passed
        return out


def _num(x: float):
    return x if math.isfinite(x) else str(x)


def pointwise(name: str, tol: float, points, fn: Callable[[np.ndarray], float]) -> Check:
    """Max of ``fn`` over ``points``; a non-finite value or a domain error fails the check at that point."""
    worst, where = 0.0, None
    for pt in points:
        try:
            v = float(fn(pt))
        except _POINT_ERRORS as exc:
            return Check(name, float("nan"), tol, point=list(map(float, pt)), error=str(exc))
        if not math.isfinite(v):
            return Check(name, v, tol, point=list(map(float, pt)), error="non-finite residual")
        if v >= worst:
            worst, where = v, pt
    chk = Check(name, worst, tol)
    if worst >= tol and where is not None:
        chk.point = list(map(float, where))
    return chk


def fit_check(name: str, tol: float, chart: Chart, F: FormField, points, expected: float | None) -> Check:
    try:
        c, res, spread = killing.special_killing_fit(chart, F, points)
    except (*_POINT_ERRORS, ValueError) as exc:
        return Check(name, float("nan"), tol, expected_c=expected, error=str(exc))
    return Check(name, res, tol, c=c, expected_c=expected, c_spread=spread)


# ---------------------------------------------------------------------------
# suites


def metric_checks(chart: Chart, points, tol: float, lam: float | None) -> list[Check]:
    def spd(pt):
        g, ginv = geometry.metric_at(chart, pt, 0)
        G = np.array([[float(np.real(ad.value_of(v))) for v in row] for row in g])
        return float(np.max(np.abs(G @ ginv - np.eye(chart.dim))))

    def sym(pt):
        R = geometry.ricci(chart, pt)
        return float(np.max(np.abs(R - R.T)) / (1.0 + np.max(np.abs(R))))

    checks = [
        pointwise("metric_spd", ALGEBRAIC_TOL, points, spd),
        pointwise("metricity", 1e-10, points, lambda pt: geometry.local_geometry(chart, pt).metricity_residual()),
        pointwise("ricci_symmetry", 1e-11, points, sym),
    ]
    if lam is not None:
        checks.append(pointwise(f"einstein(lambda={lam:g})", tol, points, lambda pt: geometry.einstein_residual(chart, pt, lam)))
    return checks


def foliation_checks(chart: Chart, fol: toric.FoliationMap, points, cone_points, tol: float) -> list[Check]:
    def rel(pt):
        u = fol.to_foliated(pt)
        w = toric.extract_special_form(fol, 1.0, u)
        _, direct, _ = toric.direct_expansion_oracle(fol, 1.0, u)
        return np.linalg.norm((w - direct).vector()) / np.linalg.norm(direct.vector())

    def volume(cp):
        return toric.volume_identity_residual(fol, cp[0], fol.to_foliated(cp[1:]))

    def r_indep(pt):
        u = fol.to_foliated(pt)
        return killing.r_independence_residual(lambda r: toric.extract_special_form(fol, r, u), (0.5, 1.0, 2.0))

    return [
        pointwise("extractor_vs_oracle", ALGEBRAIC_TOL, points, rel),
        pointwise("omega_identity", 1e-10, cone_points, volume),
        pointwise("r_independence", 1e-10, points, r_indep),
    ]


def killing_check(name: str, chart: Chart, F: FormField, points, tol: float) -> Check:
    def res(pt):
        a, b = killing.killing_residuals(chart, F, pt)
        return max(a, b)

    return pointwise(name, tol, points, res)


def lift_check(name: str, cone: Chart, F: FormField, cone_points, tol: float) -> Check:
    lift = killing.semmelmann_lift(F)
    return pointwise(name, tol, cone_points, lambda cp: killing.parallel_residual(cone, lift, cp))


def ypq_suite(a: float, samples: int, seed: int, tol: float) -> tuple[dict, list[Check]]:
    try:
        params = ypq.YpqParams(a)
    except ypq.YpqParamError as exc:
        raise UsageError(str(exc)) from None
    chart = ypq.ypq_chart(params)
    cone = geometry.cone_extend(chart)
    rng = np.random.default_rng(seed)
    points = chart.sample(rng, samples)
    cone_points = cone.sample(rng, samples)
    sas = ypq.SasakiStructure(params)
    fol = sas.foliation
    y1, y2, y3 = params.roots

    def roots_res(_):
        back = max(abs(ypq.cubic(a, y)) for y in params.roots)
        vieta = max(abs(y1 + y2 + y3 - 1.5), abs(y1 * y2 + y1 * y3 + y2 * y3), abs(y1 * y2 * y3 + a / 2))
        return max(back, vieta)

    def aux_res(pt):
        w, q, p = ypq.aux_functions(a, pt[2])
        return max(abs(p - w * q), abs(p * (1 - pt[2]) / 2 - ypq.cubic(a, pt[2])))

    def dz_res(pt):
        u = fol.to_foliated(pt)
        A, _ = toric.jacobian_at(fol, 1.0, u[:2])
        return float(np.max(np.abs(np.array(A, dtype=complex) - ypq.dz_display(params, u[0], u[1]))))

    def minors_res(pt):
        u = fol.to_foliated(pt)
        A, _ = toric.jacobian_at(fol, 1.0, u[:2])
        worst = 0.0
        for (i, J, K, L), expect in ypq.printed_minors(params, u[0], u[1]).items():
            worst = max(worst, abs(toric.minor_det(A, toric.IndexTriple(i, J, K, L)) - expect))
        return worst

    def closed_res(pt):
        w = toric.extract_special_form(fol, 1.0, fol.to_foliated(pt))
        xi, ups = ypq.closed_form_xi_upsilon(params, list(pt), primed=True)
        return max((w.real() - xi).max_abs(), (w.imag() - ups).max_abs())

    psi0, _ = sas.ladder(0)
    psi1, phi1 = sas.ladder(1)
    psi2, phi2 = sas.ladder(2)
    Xi = toric.special_form_field(fol, "real")
    Ups = toric.special_form_field(fol, "imag")

    def conformal(F):
        def res(pt):
            return max(killing.cky_residual(chart, F, pt), killing.closed_residual(chart, F, pt))

        return res

    def top_form(pt):
        # eta ^ (d eta)^2 is a nonvanishing multiple of the volume form
        fp = killing.FormAtPoint(chart, psi2, pt)
        if fp.size < 1e-8:
            return float("inf")
        return killing.parallel_residual(chart, psi2, pt)

    checks = [Check("cubic_roots", roots_res(None), ALGEBRAIC_TOL), pointwise("aux_functions", ALGEBRAIC_TOL, points, aux_res)]
    checks += metric_checks(chart, points, tol, 4.0)
    checks += [
        pointwise("reeb_unit", tol, points, lambda pt: abs(sas.reeb_norm(pt) - 1.0)),
        pointwise("reeb_killing_vector", tol, points, sas.killing_vector_residual),
        killing_check("killing(Psi_0=eta)", chart, psi0, points, tol),
        fit_check("special(Psi_0=eta)", tol, chart, psi0, points, -2.0),
        killing_check("killing(Psi_1=eta^d_eta)", chart, psi1, points, tol),
        fit_check("special(Psi_1=eta^d_eta)", tol, chart, psi1, points, -4.0),
        pointwise("parallel(Psi_2=eta^d_eta^2)", tol, points, top_form),
        pointwise("closed_conformal(Phi_1=d_eta)", tol, points, conformal(phi1)),
        pointwise("closed_conformal(Phi_2=d_eta^2)", tol, points, conformal(phi2)),
        pointwise("dz_display", 1e-10, points, dz_res),
        pointwise("minors", ALGEBRAIC_TOL, points, minors_res),
    ]
    checks += foliation_checks(chart, fol, points, cone_points, tol)
    checks += [
        pointwise("closed_form_xi_upsilon", 1e-10, points, closed_res),
        killing_check("killing(Xi)", chart, Xi, points, tol),
        killing_check("killing(Upsilon)", chart, Ups, points, tol),
        fit_check("special(Xi)", tol, chart, Xi, points, -3.0),
        fit_check("special(Upsilon)", tol, chart, Ups, points, -3.0),
        lift_check("cone_parallel(eta)", cone, psi0, cone_points, tol),
        lift_check("cone_parallel(eta^d_eta)", cone, psi1, cone_points, tol),
        lift_check("cone_parallel(Xi)", cone, Xi, cone_points, tol),
        lift_check("cone_parallel(Upsilon)", cone, Ups, cone_points, tol),
    ]
    info = {
        "a": a,
        "roots": list(params.roots),
        "delta_theta": params.delta_theta,
        "delta_y": params.delta_y,
        # readings certified by the dz_display check
        "conventions": {
            "p(y)": "2*(a - 3*y^2 + 2*y^3)/(1 - y)",
            "x3_log_coefficients": "-1/(12*y_i)",
            "theta_range": "(0, pi)",
        },
    }
    return info, checks


def flat3_killing_form() -> FormField:
    """``x3 dx1^dx2 + x1 dx2^dx3 + x2 dx3^dx1`` on flat R^3."""

    def func(X):
        x1, x2, x3 = X
        return FormValue.basis(3, 0, 1) * x3 + FormValue.basis(3, 1, 2) * x1 + FormValue.basis(3, 2, 0) * x2

    return FormField(3, 2, func, "Psi_flat")


def flat3_suite(samples: int, seed: int, tol: float) -> tuple[dict, list[Check]]:
    chart = flat_chart(3)
    points = np.random.default_rng(seed).uniform(-1.0, 1.0, (samples, 3))
    chart = Chart(chart.name, chart.coords, chart.metric, {c: (-1.0 - 1e-9, 1.0 + 1e-9) for c in chart.coords})
    F = flat3_killing_form()

    def agreement(pt):
        a, b = killing.killing_residuals(chart, F, pt)
        return abs(a - b)

    def d_is_volume(pt):
        fp = killing.FormAtPoint(chart, F, pt)
        return abs(fp.d_dense[0, 1, 2] - 3.0)

    checks = metric_checks(chart, points, tol, 0.0)
    checks += [
        pointwise("killing(Psi_flat)", ALGEBRAIC_TOL, points, lambda pt: killing.killing_residual(chart, F, pt)),
        pointwise("killing_formulations_agree", 1e-11, points, agreement),
        pointwise("d(Psi_flat)=3vol", ALGEBRAIC_TOL, points, d_is_volume),
    ]
    return {}, checks


def load_chart_file(path: str) -> tuple[dict, Chart]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read chart file {path}: {exc}") from None
    try:
        return data, Chart.from_json(data)
    except (ChartError, exprlang.ExprError) as exc:
        raise UsageError(str(exc)) from None


def file_foliation(data: dict, chart: Chart) -> toric.FoliationMap | None:
    if "foliation" not in data:
        return None
    try:
        fol = toric.FoliationMap.from_json(data["foliation"], chart.coords, chart.params)
    except (toric.FoliationError, exprlang.ExprError) as exc:
        raise UsageError(str(exc)) from None
    if fol.base_dim != chart.dim:
        raise UsageError(f"foliation needs a {fol.base_dim}-dimensional chart, got {chart.dim}")
    return fol


def file_suite(path: str, samples: int, seed: int, tol: float) -> tuple[dict, list[Check], str]:
    data, chart = load_chart_file(path)
    fol = file_foliation(data, chart)
    lam = data.get("einstein")
    rng = np.random.default_rng(seed)
    points = chart.sample(rng, samples)
    checks = metric_checks(chart, points, tol, lam)
    if fol is not None:
        cone = geometry.cone_extend(chart)
        cone_points = cone.sample(rng, samples)
        checks += foliation_checks(chart, fol, points, cone_points, tol)
        if lam is not None:
            for part, label in (("real", "Xi"), ("imag", "Upsilon")):
                F = toric.special_form_field(fol, part)
                checks.append(killing_check(f"killing({label})", chart, F, points, tol))
                checks.append(fit_check(f"special({label})", tol, chart, F, points, None))
    return dict(chart.params), checks, chart.name


def run_verify(chart: str | None, a: float, file: str | None, samples: int, seed: int, tol: float) -> dict:
    if samples < 1:
        raise UsageError("samples must be at least 1")
    start = time.perf_counter()
    if file is not None:
        params, checks, name = file_suite(file, samples, seed, tol)
    elif chart == "ypq":
        params, checks = ypq_suite(a, samples, seed, tol)
        name = "ypq"
    elif chart == "flat3":
        params, checks = flat3_suite(samples, seed, tol)
        name = "flat3"
    else:
        raise UsageError(f"unknown chart {chart!r}; use ypq, flat3 or --file")
    return {
        "version": __version__,
        "chart": name,
        "params": params,
        "samples": samples,
        "seed": seed,
        "radial_range": list(geometry.DEFAULT_CONE_RANGE),
        "checks": [c.as_dict() for c in checks],
        "pass": all(c.passed for c in checks),
        "duration_ms": round((time.perf_counter() - start) * 1000.0, 3),
    }


# ---------------------------------------------------------------------------
# extract


def parse_point(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"malformed point entry {item!r}; expected name=value")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"not a number in point entry {item!r}") from None
    if not out:
        raise UsageError("empty point")
    return out


def _label(names: Sequence[str], key: tuple[int, ...]) -> str:
    return "^".join("d" + names[k] for k in key) if key else "1"


def run_extract(chart: str | None, a: float, file: str | None, point: str) -> dict:
    values = parse_point(point)
    closed = None
    if file is not None:
        data, ch = load_chart_file(file)
        fol = file_foliation(data, ch)
        if fol is None:
            raise UsageError("chart file has no foliation section")
    elif chart == "ypq":
        try:
            params = ypq.YpqParams(a)
        except ypq.YpqParamError as exc:
            raise UsageError(str(exc)) from None
        ch, fol = ypq.ypq_chart(params), ypq.ypq_foliation(params)
        closed = params
    else:
        raise UsageError(f"extract needs a chart with a foliation (ypq or --file), got {chart!r}")
    r = values.pop("r", 1.0)
    missing = [c for c in ch.coords if c not in values]
    extra = [k for k in values if k not in ch.coords]
    if missing or extra:
        raise UsageError(f"point must name exactly {', '.join(ch.coords)} (and optionally r); missing {missing}, unknown {extra}")
    X = [values[c] for c in ch.coords]
    if not ch.contains(X) or r <= 0:
        raise UsageError(f"point {values} (r={r}) is outside the admissible domain")
    u = fol.to_foliated(X)
    try:
        w = toric.extract_special_form(fol, r, u)
        _, direct, _ = toric.direct_expansion_oracle(fol, r, u)
    except toric.FoliationError as exc:
        raise UsageError(str(exc)) from None
    names = fol.base_names
    rows = []
    keys = sorted(set(w.coeffs) | set(direct.coeffs))
    for key in keys:
        e, o = complex(w[key]), complex(direct[key])
        if abs(e) == 0 and abs(o) == 0:
            continue
        row = {"component": _label(names, key), "extractor": [e.real, e.imag], "oracle": [o.real, o.imag], "diff": abs(e - o)}
        rows.append(row)
    out = {"chart": ch.name, "point": dict(zip(ch.coords, X)), "r": r, "coframe": ["d" + s for s in names], "omega": rows}
    if closed is not None:
        xi, ups = ypq.closed_form_xi_upsilon(closed, X, primed=True)
        out["closed_form_diff"] = max((w.real() - xi).max_abs(), (w.imag() - ups).max_abs())
    return out


def format_extract(out: dict) -> str:
    lines = [f"chart {out['chart']}  r = {out['r']:g}", "point " + ", ".join(f"{k}={v:g}" for k, v in out["point"].items())]
    lines.append("coframe " + ", ".join(out["coframe"]))
    lines.append(f"{'component':<22}{'Xi (extractor)':>20}{'Upsilon (extractor)':>22}{'Xi (oracle)':>20}{'Upsilon (oracle)':>20}{'|diff|':>12}")
    for row in out["omega"]:
        e, o = row["extractor"], row["oracle"]
        lines.append(f"{row['component']:<22}{e[0]:>20.12g}{e[1]:>22.12g}{o[0]:>20.12g}{o[1]:>20.12g}{row['diff']:>12.3g}")
    if "closed_form_diff" in out:
        lines.append(f"closed-form Xi + i Upsilon, max |diff| = {out['closed_form_diff']:.3g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# roots


def run_roots(a: float) -> dict:
    try:
        y = ypq.cubic_roots(a)
    except ypq.YpqParamError as exc:
        raise UsageError(str(exc)) from None
    y1, y2, y3 = y
    return {
        "a": a,
        "roots": list(y),
        "back_substitution": [abs(ypq.cubic(a, v)) for v in y],
        "vieta": {
            "sum-3/2": abs(y1 + y2 + y3 - 1.5),
            "pairwise": abs(y1 * y2 + y1 * y3 + y2 * y3),
            "product+a/2": abs(y1 * y2 * y3 + a / 2),
        },
    }


def format_roots(out: dict) -> str:
    lines = [f"a = {out['a']:g}"]
    for k, (v, res) in enumerate(zip(out["roots"], out["back_substitution"]), 1):
        lines.append(f"y{k} = {v:+.17g}   |a - 3y^2 + 2y^3| = {res:.3g}")
    lines += [f"vieta {k}: {v:.3g}" for k, v in out["vieta"].items()]
    return "\n".join(lines)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="killingforms", description="Special Killing forms on toric Sasaki-Einstein charts.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the residual checks and emit a JSON report")
    v.add_argument("chart", nargs="?", choices=("ypq", "flat3"), help="built-in chart (omit with --file)")
    v.add_argument("--a", type=float, default=0.5, help="Y^{p,q} parameter in (0, 1)")
    v.add_argument("--file", help="chart definition JSON")
    v.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--tol", type=float, default=GEOMETRIC_TOL, help="tolerance of the geometric residuals")
    v.add_argument("--out", help="write the report here instead of stdout")

    e = sub.add_parser("extract", help="print omega^M at a point via the extractor and the oracle")
    e.add_argument("chart", nargs="?", choices=("ypq",))
    e.add_argument("--a", type=float, default=0.5)
    e.add_argument("--file")
    e.add_argument("--point", required=True, help='e.g. "theta=1.0,y=0.05,psi=0.3,phi=0.7,alpha=0.2,r=1.0"')
    e.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    r = sub.add_parser("roots", help="roots of a - 3y^2 + 2y^3")
    r.add_argument("--a", type=float, required=True)
    r.add_argument("--json", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            if args.chart is None and args.file is None:
                raise UsageError("verify needs a chart name or --file")
            report = run_verify(args.chart, args.a, args.file, args.samples, args.seed, args.tol)
            text = json.dumps(report, indent=2)
            if args.out:
                Path(args.out).write_text(text + "\n", encoding="utf-8")
            else:
                print(text)
            return 0 if report["pass"] else 1
        if args.command == "extract":
            out = run_extract(args.chart, args.a, args.file, args.point)
            print(json.dumps(out, indent=2) if args.json else format_extract(out))
            return 0
        out = run_roots(args.a)
        print(json.dumps(out, indent=2) if args.json else format_roots(out))
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
