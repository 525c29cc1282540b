import numpy as np
import pytest

from helpers import random_field
from killingforms import autodiff as ad
from killingforms import killing, toric, ypq
from killingforms.exterior import FormField, FormValue, ext_deriv_at, wedge
from killingforms.geometry import cone_extend, flat_chart, sphere2_chart

SPHERE = sphere2_chart()
SPHERE_CONE = cone_extend(SPHERE)
KILLING_1FORM = FormField(2, 1, lambda X: FormValue.basis(2, 1) * ad.sin(X[0]) ** 2, "sin^2 dphi")
PARAMS = ypq.YpqParams(0.5)
CHART = ypq.ypq_chart(PARAMS)
CONE = cone_extend(CHART)
SAS = ypq.SasakiStructure(PARAMS)


def flat_psi():
    def func(X):
        x1, x2, x3 = X
        return FormValue.basis(3, 0, 1) * x3 + FormValue.basis(3, 1, 2) * x1 + FormValue.basis(3, 2, 0) * x2

    return FormField(3, 2, func, "psi")


def sphere_points(n, seed=0):
    return SPHERE.sample(np.random.default_rng(seed), n, margin=0.1)


def test_sphere_killing_vector_dual():
    for pt in sphere_points(5):
        assert killing.cky_residual(SPHERE, KILLING_1FORM, pt) < 1e-10
        a, b = killing.killing_residuals(SPHERE, KILLING_1FORM, pt)
        assert a < 1e-10 and b < 1e-10


def test_random_form_is_not_killing():
    rng = np.random.default_rng(11)
    F = random_field(rng, 5, 2)
    pt = CHART.sample(rng, 1)[0]
    assert killing.cky_residual(CHART, F, pt) > 1e-2
    assert killing.killing_residual(CHART, F, pt) > 1e-2


def test_flat_killing_form():
    chart = flat_chart(3)
    rng = np.random.default_rng(2)
    for pt in rng.uniform(-0.99, 0.99, (20, 3)):
        a, b = killing.killing_residuals(chart, flat_psi(), pt)
        assert a < 1e-12 and b < 1e-12


def test_parallel_forms_are_killing():
    const = FormField(4, 2, lambda X: FormValue.basis(4, 0, 3) * 1.5 + FormValue.basis(4, 1, 2) * -0.5)
    chart = flat_chart(4)
    assert killing.killing_residual(chart, const, [0.1, 0.2, 0.3, 0.4]) < 1e-12
    assert killing.parallel_residual(chart, const, [0.1, 0.2, 0.3, 0.4]) == 0.0


def test_degree_range():
    with pytest.raises(ValueError):
        killing.cky_residual(SPHERE, FormField(2, 0, lambda X: FormValue.scalar(2, X[0])), [1.0, 1.0])


def test_sphere_special_constant():
    c, res, spread = killing.special_killing_fit(SPHERE, KILLING_1FORM, sphere_points(10))
    assert c == pytest.approx(-2.0, abs=1e-10)
    assert res < 1e-10 and spread < 1e-6


def test_degenerate_fit():
    zero = FormField(2, 1, lambda X: FormValue.zero(2, 1))
    with pytest.raises(ValueError):
        killing.special_killing_fit(SPHERE, zero, sphere_points(3))


def test_lift_of_constant_is_dr():
    one = FormField(2, 0, lambda X: FormValue.scalar(2, 1.0))
    lift = killing.semmelmann_lift(one)
    out = lift.at([1.3, 1.0, 0.5]).values()
    assert out.coeffs == {(0,): 1.0}


def test_lift_of_eta_matches_formula():
    eta = SAS.eta
    lift = killing.semmelmann_lift(eta)
    pt = CONE.sample(np.random.default_rng(3), 1)[0]
    r = pt[0]
    X = ad.seed_all(pt, 3)
    e = eta(X[1:])
    de = ext_deriv_at(e, list(range(1, 6)))
    dr = FormValue.basis(6, 0)
    expect = wedge(dr, e.shifted(6, 1)) * r + de.shifted(6, 1) * (r * r / 2)
    got = lift(X)
    assert np.max(np.abs(got.values().vector() - expect.values().vector())) < 1e-14


def test_lift_degree_mismatch():
    with pytest.raises(ValueError):
        killing.semmelmann_lift(KILLING_1FORM, p=2)


def test_sphere_lift_is_parallel():
    lift = killing.semmelmann_lift(KILLING_1FORM)
    for pt in SPHERE_CONE.sample(np.random.default_rng(4), 5, margin=0.05):
        assert killing.parallel_residual(SPHERE_CONE, lift, pt) < 1e-12


def test_lift_of_random_form_is_not_parallel():
    rng = np.random.default_rng(8)
    lift = killing.semmelmann_lift(random_field(rng, 5, 1))
    pt = CONE.sample(rng, 1)[0]
    assert killing.parallel_residual(CONE, lift, pt) > 1e-2


def test_eta_lift_parallel_and_closed():
    rng = np.random.default_rng(9)
    for k in (0, 1):
        psi, _ = SAS.ladder(k)
        lift = killing.semmelmann_lift(psi)
        for pt in CONE.sample(rng, 3):
            assert killing.parallel_residual(CONE, lift, pt) < 1e-8
            assert killing.closed_residual(CONE, lift, pt) < 1e-9


def test_formulations_agree_and_special_implies_killing():
    rng = np.random.default_rng(10)
    pts = CHART.sample(rng, 4)
    for F in (SAS.eta, SAS.ladder(1)[0]):
        c, res, spread = killing.special_killing_fit(CHART, F, pts)
        assert spread < 1e-6
        for pt in pts:
            a, b = killing.killing_residuals(CHART, F, pt)
            assert abs(a - b) < 1e-11
            assert a < 10 * max(res, 1e-8)


def test_r_independence():
    base = FormValue.basis(3, 0, 1) * 2.0
    assert killing.r_independence_residual(lambda r: base, [0.5, 1.0, 2.0]) == 0.0
    fol = ypq.ypq_foliation(PARAMS)
    u = fol.to_foliated(CHART.sample(np.random.default_rng(12), 1)[0])
    omega_full = lambda r: toric.direct_expansion_oracle(fol, r, u)[0]  # noqa: E731
    assert killing.r_independence_residual(omega_full, [0.5, 1.0, 2.0]) > 0.1


def test_verdict():
    v = killing.KillingVerdict("killing", 1e-12, 1e-8, 10, seed=1)
    assert v.passed and v.as_dict()["pass"]
    assert not killing.KillingVerdict("x", float("nan"), 1e-8, 1).passed
    assert "c" in killing.KillingVerdict("special", 0.0, 1.0, 1, c=-3.0, c_spread=0.0).as_dict()


def test_max_over():
    assert killing.max_over([1, 2, 3], lambda p: p * 1.0) == 3.0
    assert np.isnan(killing.max_over([1, 2], lambda p: float("nan")))
