import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisosym.norms import (NormError, NormSpec, hardy_check, lorentz_norm, lorentz_zygmund_norm, luxemburg_norm,
                            lz_admissible, orlicz_lorentz_B, orlicz_lorentz_norm)
from anisosym.profiles import StepProfile
from anisosym.young import OneDimYoung


def indicator(m=1.0):
    return StepProfile(np.array([0, m]), np.array([1.0]), True)


def random_profile(rng, K=None):
    K = K or int(rng.integers(1, 8))
    w = rng.random(K) + 0.05
    v = np.sort(rng.random(K) * 10)[::-1]
    return StepProfile.from_widths(w, v, True)


def test_lorentz_examples():
    assert lorentz_norm(indicator(), 2, 1) == pytest.approx(2.0)
    assert lorentz_norm(StepProfile(np.array([0, 1.0]), np.array([2.0])), 3, 3) == pytest.approx(2.0)
    assert lorentz_norm(indicator(), "inf", "inf") == 1.0


@pytest.mark.parametrize("p,q,m", [(2, 1, 0.3), (3, 2, 2.0), (1.5, 4, 5.0), (4, 4, 0.1)])
def test_lorentz_indicator_closed_form(p, q, m):
    assert lorentz_norm(indicator(m), p, q) == pytest.approx((p / q) ** (1 / q) * m ** (1 / p), rel=1e-12)


def test_lorentz_sup_case():
    f = StepProfile.from_widths(np.array([1.0, 3.0]), np.array([4.0, 1.0]), True)
    # sup of s^{1/2} f*(s) is attained at a right end of a piece
    assert lorentz_norm(f, 2, "inf") == pytest.approx(max(4.0, 2.0))


def test_lorentz_zygmund_examples():
    assert lorentz_zygmund_norm(indicator(), "inf", 1, -2) == pytest.approx(1.0, rel=1e-10)
    assert lorentz_zygmund_norm(indicator(), "inf", 2, -0.5, -1) == pytest.approx(1.0, rel=1e-8)


def test_lorentz_zygmund_reduces_to_lorentz():
    rng = np.random.default_rng(2)
    for _ in range(5):
        f = random_profile(rng)
        assert lorentz_zygmund_norm(f, 3, 2, 0.0) == pytest.approx(lorentz_norm(f, 3, 2), rel=1e-9)


def test_lz_admissibility():
    assert lz_admissible(math.inf, math.inf, 0.0)
    assert not lz_admissible(math.inf, 2, -0.5)
    assert lz_admissible(math.inf, 2, -0.5, -1)
    assert not lz_admissible(math.inf, 1, 0.0)
    with pytest.raises(NormError, match="trivial"):
        NormSpec("lorentz_zygmund", p="inf", q=1, alpha=0.0)
    with pytest.raises(NormError):
        NormSpec("lorentz", p=1, q=2)
    with pytest.raises(NormError):
        NormSpec("orlicz")


def test_luxemburg_examples():
    A = OneDimYoung.from_power(1, 2)
    assert luxemburg_norm(StepProfile.constant(1.0, 4.0), A) == pytest.approx(2.0, rel=1e-9)
    # power Young function: Luxemburg norm is the L^p norm times lam^{1/p}
    B = OneDimYoung.from_power(1, 3)
    f = random_profile(np.random.default_rng(3))
    lp = float(np.sum(f.values**3 * np.diff(f.breaks))) ** (1 / 3)
    assert luxemburg_norm(f, B) == pytest.approx(lp, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_homogeneity(seed, t):
    f = random_profile(np.random.default_rng(seed))
    tf = StepProfile(f.breaks, t * f.values, True)
    A = OneDimYoung.from_power(1, 2.5)
    assert lorentz_norm(tf, 2, 3) == pytest.approx(t * lorentz_norm(f, 2, 3), rel=1e-10)
    assert luxemburg_norm(tf, A) == pytest.approx(t * luxemburg_norm(f, A), rel=1e-8)
    assert lorentz_zygmund_norm(tf, "inf", 1, -2) == pytest.approx(t * lorentz_zygmund_norm(f, "inf", 1, -2),
                                                                   rel=1e-9)


def test_hardy_indicator_values():
    h = hardy_check(indicator(), 0.5, 1)
    assert (h.lhs1, h.rhs1, h.lhs2, h.rhs2) == pytest.approx((4.0, 2.0, 4 / 3, 2 / 3), rel=1e-10)
    assert h.ratio1 == pytest.approx(2.0) and h.ratio2 == pytest.approx(2.0)


def test_hardy_needs_monotone_below_one():
    with pytest.raises(ValueError, match="monotone"):
        hardy_check(indicator(), 0.5, 0.5)
    h = hardy_check(indicator(), 1 / 3, 0.5, monotone=True)
    assert h.ratio1 >= 1 and h.ratio2 >= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 3), st.floats(1, 4))
def test_hardy_inequalities_hold(seed, r, q):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 6))
    psi = StepProfile.from_widths(rng.random(K) + 0.05, rng.random(K) * 5, False)
    h = hardy_check(psi, r, q)
    # constant 1 on each side: lhs * r^q <= rhs
    assert h.lhs1 * r**q <= h.rhs1 * (1 + 1e-8) + 1e-300
    assert h.lhs2 * r**q <= h.rhs2 * (1 + 1e-8) + 1e-300


def test_orlicz_lorentz_matches_lorentz_for_powers():
    q, N = 1.5, 2
    A = OneDimYoung.from_power(1, q)
    B = orlicz_lorentz_B(A, N)
    assert B.head == pytest.approx(q, abs=1e-9) and B.tail == pytest.approx(q, abs=1e-9)
    qs = N * q / (N - q)
    rng = np.random.default_rng(0)
    ratios = [orlicz_lorentz_norm(f, B) / lorentz_norm(f, qs, q) for f in (random_profile(rng) for _ in range(20))]
    # two-sided equivalence with a fixed constant
    assert max(ratios) / min(ratios) == pytest.approx(1.0, abs=1e-6)


def test_norm_spec_dispatch():
    f = indicator(2.0)
    assert NormSpec("lorentz", 2, 1)(f) == pytest.approx(lorentz_norm(f, 2, 1))
    assert NormSpec("orlicz", A=OneDimYoung.from_power(1, 2))(f) == pytest.approx(math.sqrt(2), rel=1e-9)
