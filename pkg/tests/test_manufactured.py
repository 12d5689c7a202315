import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from serre_galerkin.manufactured import ManufacturedProblem, SelfCheckError


def test_self_check_passes():
    checks = ManufacturedProblem(0.1, 0.1).self_check()
    assert all(err <= tol for _, err, tol in checks)


@given(st.floats(0.0, 0.45), st.floats(0.0, 0.5))
def test_exact_residuals_vanish(a, b):
    mp = ManufacturedProblem(a, b)
    x = np.linspace(0, 1, 37)
    r1, r2 = mp.exact_residuals(x, 0.37)
    assert np.max(np.abs(r1)) < 1e-12 and np.max(np.abs(r2)) < 1e-11


def test_validation():
    for a, b in ((0.5, 0.1), (-0.1, 0.1), (0.1, -1.0)):
        with pytest.raises(ValueError):
            ManufacturedProblem(a, b)


def test_properties():
    mp = ManufacturedProblem(0.2, 0.1)
    assert mp.c0 == pytest.approx(0.8)
    assert not mp.steady and ManufacturedProblem(0, 0).steady
    x = np.linspace(0, 1, 50)
    assert np.min(mp.eta(x, 0.3)) >= mp.c0 - 1e-12
    e0, u0 = mp.initial()
    assert np.allclose(e0(x), mp.eta(x, 0.0)) and np.allclose(u0(x), mp.u(x, 0.0))


def test_steady_forcing_zero():
    f, g = ManufacturedProblem(0, 0).forcing
    x = np.linspace(0, 1, 11)
    assert np.all(f(x, 0.2) == 0) and np.all(g(x, 0.2) == 0)


def test_corrupted_forcing_detected(monkeypatch):
    mp = ManufacturedProblem(0.1, 0.1)
    orig = ManufacturedProblem.forcing_g
    monkeypatch.setattr(ManufacturedProblem, "forcing_g", lambda self, x, t: orig(self, x, t) * (1 + 1e-4))
    with pytest.raises(SelfCheckError):
        mp.self_check()
