import math

import numpy as np
import pytest

from killingforms import autodiff as ad
from killingforms import killing, toric, ypq
from killingforms.geometry import metric_at

A_VALUES = (0.3, 0.5, 0.7)


@pytest.mark.parametrize("a", A_VALUES + (0.01, 0.999))
def test_cubic_roots(a):
    y1, y2, y3 = ypq.cubic_roots(a)
    assert y1 < 0 < y2 < y3
    for y in (y1, y2, y3):
        assert abs(a - 3 * y * y + 2 * y**3) < 1e-12
    assert abs(y1 + y2 + y3 - 1.5) < 1e-12
    assert abs(y1 * y2 + y1 * y3 + y2 * y3) < 1e-12
    assert abs(y1 * y2 * y3 + a / 2) < 1e-12


@pytest.mark.parametrize("a", [0.0, 1.0, 1.5, -0.2])
def test_cubic_roots_rejects_bad_a(a):
    with pytest.raises(ypq.YpqParamError):
        ypq.cubic_roots(a)
    with pytest.raises(ypq.YpqParamError):
        ypq.YpqParams(a)


def test_params_domain_and_margin():
    p = ypq.YpqParams(0.5)
    y1, y2, _ = p.roots
    assert p.domain["y"] == (y1 + 0.05, y2 - 0.05)
    assert p.domain["theta"] == (0.05, math.pi - 0.05)
    with pytest.raises(ypq.YpqParamError):
        ypq.YpqParams(0.5, delta_y=1.0)


@pytest.mark.parametrize("a", A_VALUES)
def test_aux_functions(a):
    w, q, p = ypq.aux_functions(a, 0.0)
    assert (w, q, p) == pytest.approx((2 * a, 1.0, 2 * a))
    params = ypq.YpqParams(a)
    lo, hi = params.domain["y"]
    for y in np.linspace(lo, hi, 25):
        w, q, p = ypq.aux_functions(a, y)
        assert w > 0 and q > 0 and p > 0
        assert abs(p - w * q) < 1e-12
        assert abs(p * (1 - y) / 2 - ypq.cubic(a, y)) < 1e-12


@pytest.mark.parametrize("a", A_VALUES)
def test_metric_positive_definite(a):
    params = ypq.YpqParams(a)
    chart = ypq.ypq_chart(params)
    for pt in chart.sample(np.random.default_rng(42), 100):
        g, _ = metric_at(chart, pt, 0)
        G = np.array([[float(ad.value_of(v)) for v in row] for row in g])
        np.linalg.cholesky(G)
        assert G[0, 0] == (1 - pt[2]) / 6


def test_reeb_and_contact():
    params = ypq.YpqParams(0.5)
    sas = ypq.SasakiStructure(params)
    np.testing.assert_allclose(sas.xi, [0, 0, 0, 3, -0.5], atol=1e-14)
    for pt in sas.chart.sample(np.random.default_rng(1), 20):
        xi, eta = ypq.reeb_contact(params, pt)
        assert abs(sum(complex(ad.value_of(eta[(k,)])) * xi[k] for k in range(5)) - 1) < 1e-12
        assert sas.killing_vector_residual(pt) < 1e-9


def test_convention_fault_is_reported():
    sas = ypq.SasakiStructure(ypq.YpqParams(0.5))
    sas.__dict__["xi"] = np.array([0, 0, 0, 1.0, 0])
    with pytest.raises(ypq.ConventionError):
        sas.check_unit([1.0, 1.0, 0.1, 1.0, 1.0])


def test_ladder():
    params = ypq.YpqParams(0.5)
    sas = ypq.SasakiStructure(params)
    chart = sas.chart
    pts = chart.sample(np.random.default_rng(2), 5)
    psi0, phi0 = sas.ladder(0)
    assert phi0 is None and psi0.degree == 1
    c, res, _ = killing.special_killing_fit(chart, psi0, pts)
    assert c == pytest.approx(-2.0, abs=1e-6) and res < 1e-8
    _, phi1 = sas.ladder(1)
    psi2, phi2 = sas.ladder(2)
    assert (phi1.degree, psi2.degree, phi2.degree) == (2, 5, 4)
    for pt in pts:
        assert killing.closed_residual(chart, phi1, pt) < 1e-10
        assert killing.cky_residual(chart, phi1, pt) < 1e-8
        assert killing.FormAtPoint(chart, psi2, pt).size > 0.1
    with pytest.raises(ValueError):
        sas.ladder(3)


def test_ladder_forms_are_coclosed():
    from killingforms.geometry import codifferential

    sas = ypq.SasakiStructure(ypq.YpqParams(0.3))
    for pt in sas.chart.sample(np.random.default_rng(3), 5):
        for k in (0, 1):
            psi, _ = sas.ladder(k)
            assert codifferential(sas.chart, psi, pt, order=3).max_abs() < 1e-9


def test_dz_display():
    params = ypq.YpqParams(0.7)
    chart, fol = ypq.ypq_chart(params), ypq.ypq_foliation(params)
    for pt in chart.sample(np.random.default_rng(4), 20):
        u = fol.to_foliated(pt)
        r = 1.4
        A, _ = toric.jacobian_at(fol, r, u[:2])
        disp = ypq.dz_display(params, u[0], u[1], r)
        assert np.max(np.abs(np.array(A, dtype=float) - disp)) < 1e-10


def test_closed_form_is_real_and_matches_extractor():
    params = ypq.YpqParams(0.3)
    chart, fol = ypq.ypq_chart(params), ypq.ypq_foliation(params)
    Xi_f, Ups_f = ypq.closed_form_fields(params)
    for pt in chart.sample(np.random.default_rng(5), 20):
        xi, ups = ypq.closed_form_xi_upsilon(params, list(pt))
        assert np.all(xi.values().vector().imag == 0) and np.all(ups.values().vector().imag == 0)
        w = toric.special_form_field(fol, "complex").at(pt, 0).values()
        assert np.max(np.abs(xi.values().vector() + 1j * ups.values().vector() - w.vector())) < 1e-10
        assert np.max(np.abs(Xi_f.at(pt, 0).values().vector() - xi.values().vector())) == 0


def test_closed_forms_special_constant():
    params = ypq.YpqParams(0.5)
    chart = ypq.ypq_chart(params)
    pts = chart.sample(np.random.default_rng(6), 5)
    for F in ypq.closed_form_fields(params):
        c, res, spread = killing.special_killing_fit(chart, F, pts)
        assert c == pytest.approx(-3.0, abs=1e-6)
        assert res < 1e-8 and spread < 1e-6
