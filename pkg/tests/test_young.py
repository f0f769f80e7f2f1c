import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisosym import young
from anisosym.young import (LogPerturbedSum, OneDimYoung, PowerSum, TwoDimCoupled, YoungError, conjugate,
                            conjugate_inverse, klimov_symmetrize, power_sum_klimov, psi, sobolev_classifier)


def test_eval_power_sum():
    phi = PowerSum((2, 2), (1, 1))
    assert young.eval(phi, [0.0, 0.0]) == 0.0
    assert young.eval(phi, [1.0, 2.0]) == pytest.approx(5.0)


def test_eval_log_perturbed():
    phi = LogPerturbedSum((2, 2), (1, 1))
    assert young.eval(phi, [1.0, 0.0]) == pytest.approx(math.log(math.e + 1), rel=1e-12)


def test_eval_rejects_nonfinite():
    with pytest.raises(ValueError):
        young.eval(PowerSum((2, 2), (1, 1)), [np.nan, 0.0])


def test_log_perturbed_rejects_all_linear():
    with pytest.raises(YoungError):
        LogPerturbedSum((1, 1), (0, 0))


def test_power_sum_validation():
    with pytest.raises(YoungError):
        PowerSum((2, 2), (1, -1))
    with pytest.raises(YoungError):
        PowerSum((1, 1), (1, 1))
    PowerSum((1, 3), (1, 1))  # p_i = 1 allowed when pbar > 1


def test_conjugate_quadratic_self_dual():
    A = OneDimYoung.from_power(0.5, 2.0)
    s = np.array([0.1, 1.0, 3.0])
    assert np.allclose(A.conjugate()(s), s**2 / 2, rtol=1e-6)


def test_conjugate_legendre_pair():
    A = OneDimYoung.from_power(1 / 3, 3.0)
    s = np.array([0.2, 1.0, 5.0])
    assert np.allclose(A.conjugate()(s), s**1.5 / 1.5, rtol=1e-6)


def test_conjugate_tabulated_exponential():
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 50, 2048)])
    A = OneDimYoung.from_function(lambda s: np.expm1(s) - s, grid=grid)
    assert float(A.conjugate()(1.0)) == pytest.approx(2 * math.log(2) - 1, rel=1e-4)


def test_conjugate_power_sum_closed_form():
    phi = PowerSum((1.5, 3), (1, 2))
    c = conjugate(phi)
    g = np.array([0.7, -1.3])
    # sup over xi of xi.g - phi(xi), coordinatewise
    xs = np.linspace(-5, 5, 200001)
    brute = sum(np.max(xs * gi - l * np.abs(xs) ** p) for gi, p, l in zip(g, phi.p, phi.lam))
    assert float(c(g)) == pytest.approx(brute, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), st.lists(st.floats(-20, 20), min_size=2, max_size=2))
def test_young_inequality(xi, eta):
    phi = PowerSum((1.5, 3), (1, 1))
    c = conjugate(phi)
    assert np.dot(xi, eta) <= float(phi(np.array(xi))) + float(c(np.array(eta))) + 1e-9 * (1 + abs(np.dot(xi, eta)))


def test_conjugate_involution_catalog():
    rng = np.random.default_rng(1)
    s = np.exp(rng.uniform(math.log(0.05), math.log(20), 20))
    for A in (OneDimYoung.from_power(1.0, 2.0), OneDimYoung.from_power(2.0, 1.5),
              OneDimYoung.from_power(1.0, 2.0).tabulated()):
        back = A.conjugate().conjugate()
        assert np.all(np.abs(back(s) - A(s)) <= 1e-4 * (1 + A(s)))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 10.0), st.floats(0.01, 10.0))
def test_scaling_law(lam, a, b):
    phi = PowerSum((1.5, 3), (1, 1))
    xi = np.array([a, b])
    assert float(phi(lam * xi)) <= lam * float(phi(xi)) * (1 + 1e-12)
    assert float(phi(xi / lam)) >= float(phi(xi)) / lam * (1 - 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50))
def test_superadditivity(s1, s2):
    h = OneDimYoung.from_power(1.0, 2.5)
    assert float(h(s1 + s2)) >= float(h(s1)) + float(h(s2)) - 1e-9


def test_power_sum_klimov_closed_forms():
    pb, Lam = power_sum_klimov((2, 2), (1, 1), 2)
    assert pb == 2 and Lam == pytest.approx(1.0, abs=1e-12)
    pb, _ = power_sum_klimov((1.5, 3), (1, 1), 2)
    assert pb == pytest.approx(2.0, abs=1e-15)
    pb3, Lam3 = power_sum_klimov((2, 2, 2), (1, 1, 1), 3)
    # isotropic quadratic: Phi_diamond(s) = s^2 in every dimension
    assert pb3 == 2 and Lam3 == pytest.approx(1.0, abs=1e-12)


def test_power_sum_klimov_rejects_degenerate():
    with pytest.raises(YoungError):
        power_sum_klimov((1, 1), (1, 1), 2)


def test_klimov_numeric_matches_closed_form():
    phi = PowerSum((1.5, 3), (1, 1))
    num = klimov_symmetrize(phi, numeric=True)
    _, Lam = power_sum_klimov(phi.p, phi.lam)
    s = np.geomspace(0.1, 10, 50)
    assert np.max(np.abs(num(s) / (Lam * s**2) - 1)) < 0.02


def test_klimov_log_perturbed_asymptotic_exponent():
    d = klimov_symmetrize(LogPerturbedSum((2, 2), (1, 1)))
    s = np.geomspace(1e4, 1e6, 200)
    slope = np.polyfit(np.log(np.log(math.e + s)), np.log(d(s) / s**2), 1)[0]
    # slow log-log convergence toward (pbar/N) sum alpha_i/p_i = 1
    assert slope == pytest.approx(1.0, abs=0.05)


def test_klimov_two_dim_coupled_power():
    d = klimov_symmetrize(TwoDimCoupled(2, 2, 0))
    s = np.geomspace(1e2, 1e4, 30)
    assert np.polyfit(np.log(s), np.log(d(s)), 1)[0] == pytest.approx(2.0, abs=1e-3)


def test_psi_and_inverse():
    A = OneDimYoung.from_power(2.0, 3.0)
    Psi, Pinv = psi(A)
    r = np.array([0.5, 2.0, 7.0])
    assert np.allclose(Psi(np.array([1.0, 2.0])), [2.0, 8.0])
    assert np.allclose(Pinv(r), np.sqrt(r / 2), rtol=1e-8)
    B = OneDimYoung.from_power(1.0, 2.0)
    _, inv = psi(B)
    assert float(inv(3.0)) == pytest.approx(3.0, rel=1e-10)


def test_psi_plateau():
    B = OneDimYoung.from_function(lambda s: np.maximum(0, s - 1) ** 2, knots=[1.0])
    assert B.s0 == pytest.approx(1.0)
    _, inv = psi(B)
    assert float(inv(0.0)) == pytest.approx(1.0)


def test_conjugate_inverse():
    A = OneDimYoung.from_power(1.0, 2.0)
    ci = conjugate_inverse(A)
    assert float(ci(1.0)) == pytest.approx(2.0, rel=1e-10)
    assert float(ci(0.0)) == 0.0
    pb, Lam = 2.4, 0.8
    B = OneDimYoung.from_power(Lam, pb)
    assert float(B.conjugate()(conjugate_inverse(B)(5.0))) == pytest.approx(5.0, rel=1e-6)


def test_sobolev_classifier_regimes():
    assert sobolev_classifier(OneDimYoung.from_power(1, 3), 2).regime == "bounded"
    rep = sobolev_classifier(OneDimYoung.from_power(1, 2), 3)
    assert rep.regime == "divergent"
    # N=3: H(r) = (2 sqrt(r))^{2/3}, so H^{-1}(t) = t^3/4 and Phi_N(2) = (8/4)^2
    assert float(rep.phi_N(2.0)) == pytest.approx(4.0, rel=1e-6)


def test_sobolev_classifier_needs_normalization_at_zero():
    with pytest.raises(YoungError, match="renormalize"):
        sobolev_classifier(OneDimYoung.from_power(1, 2), 2)
    fixed = young.normalize_near_zero(OneDimYoung.from_power(1, 2), 1.0)
    assert sobolev_classifier(fixed, 2).regime == "divergent"


def test_equivalence_constants_finite():
    K1, K2 = young.equivalence_constants(PowerSum((1.5, 3), (1, 1)))
    assert 0 < K1 <= K2 < math.inf


def test_plateau_inequality():
    phi_d = klimov_symmetrize(PowerSum((1.5, 3), (1, 1)))
    _, inv = psi(phi_d)
    r = np.geomspace(1e-3, 1e3, 40)
    assert np.all(phi_d.conjugate()(r) <= phi_d(inv(r)) * (1 + 1e-8))


def test_one_dim_young_roundtrip(tmp_path):
    A = OneDimYoung.from_power(1.0, 2.5).tabulated()
    p = tmp_path / "a.txt"
    A.save(p)
    B = OneDimYoung.load(p)
    s = np.geomspace(1e-3, 1e3, 20)
    assert np.allclose(A(s), B(s), rtol=1e-10)
