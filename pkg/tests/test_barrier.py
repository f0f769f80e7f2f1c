import math

import numpy as np
import pytest

from anisosym.barrier import (BarrierSpec, F_profile, barrier_gradient_energy, barrier_solution, barrier_wellposed,
                              closed_form_barrier)
from anisosym.profiles import StepProfile
from anisosym.young import BarrierUndefined, OneDimYoung

QUAD = OneDimYoung.from_power(1.0, 2.0)


def torsion_spec(f=1.0, G=0.0, phi=QUAD, **kw):
    return BarrierSpec(phi, StepProfile.constant(f, math.pi), StepProfile.constant(G, math.pi), **kw)


def test_F_torsion():
    F = F_profile(torsion_spec())
    r = np.array([0.1, 1.0, 3.0])
    assert np.allclose(F(r), np.sqrt(r) / (2 * math.sqrt(math.pi)), rtol=1e-8)


def test_torsion_barrier():
    v = barrier_solution(torsion_spec())
    s = np.array([0.0, 0.5, 2.0, 3.0, math.pi])
    assert np.allclose(v(s), (1 - s / math.pi) / 4, atol=1e-9)


def test_torsion_energy():
    v = barrier_solution(torsion_spec())
    assert barrier_gradient_energy(v, QUAD) == pytest.approx(math.pi / 8, rel=1e-10)


def test_zero_data_gives_zero():
    v = barrier_solution(torsion_spec(f=0.0))
    assert np.all(v(np.linspace(0, math.pi, 9)) == 0)
    assert barrier_gradient_energy(v, QUAD) == 0.0


def test_constant_G_cone():
    G0 = 0.7
    v = barrier_solution(torsion_spec(f=0.0, G=G0))
    s = np.array([0.0, 0.5, 2.0, 3.0])
    rho = np.sqrt(s / math.pi)
    assert np.max(np.abs(v(s) - 2 * math.sqrt(G0) * (1 - rho))) < 1e-9


def test_closed_form_cross_check():
    f = StepProfile.from_widths(np.array([0.4, 1.2, math.pi - 1.6]), np.array([3.0, 1.0, 0.2]), True)
    G = StepProfile.from_widths(np.array([1.0, math.pi - 1.0]), np.array([0.5, 0.1]), False)
    for pbar, Lam in ((2.0, 1.0), (1.6, 0.8), (3.0, 1.3)):
        spec = BarrierSpec(OneDimYoung.from_power(Lam, pbar), f, G, C1=1.2, C2=1.0)
        s = np.array([0.05, 0.3, 1.0, 2.5])
        ref = closed_form_barrier(pbar, Lam, spec, s)
        assert np.allclose(barrier_solution(spec)(s), ref, rtol=2e-4)


def test_homogeneity_in_f():
    # Phi = s^2 makes F linear in f** when G = 0
    a = barrier_solution(torsion_spec(f=1.0))
    b = barrier_solution(torsion_spec(f=3.0))
    s = np.linspace(0, math.pi, 7)
    assert np.allclose(b(s), 3 * a(s), atol=1e-12)


def test_monotone_in_data():
    f1 = StepProfile.from_widths(np.array([1.0, math.pi - 1.0]), np.array([2.0, 0.5]), True)
    f2 = StepProfile.from_widths(np.array([1.0, math.pi - 1.0]), np.array([2.5, 0.5]), True)
    G = StepProfile.constant(0.1, math.pi)
    s = np.linspace(0, math.pi, 11)
    v1 = barrier_solution(BarrierSpec(QUAD, f1, G))(s)
    v2 = barrier_solution(BarrierSpec(QUAD, f2, G))(s)
    assert np.all(v2 >= v1 - 1e-12)
    assert np.all(np.diff(v1) <= 1e-12)


def test_wellposed_torsion():
    rep = barrier_wellposed(torsion_spec())
    assert rep.ok
    assert rep.details["gradient_energy"] == pytest.approx(math.pi / 8, rel=1e-10)


def test_undefined_when_psi_bounded():
    # Phi(s) = s - log(1 + s): Psi(s) = Phi(s)/s stays below 1
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e8, 4000)])
    phi = OneDimYoung.from_function(lambda s: s - np.log1p(s), grid=grid)
    spec = torsion_spec(f=50.0, phi=phi)
    rep = barrier_wellposed(spec)
    assert not rep.cond2
    with pytest.raises(BarrierUndefined, match="barrier undefined"):
        barrier_solution(spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        BarrierSpec(QUAD, StepProfile.constant(1.0, 1.0), StepProfile.constant(0.0, 2.0))
    with pytest.raises(ValueError):
        torsion_spec(C1=0.0)
