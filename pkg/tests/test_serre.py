import numpy as np
import pytest

from oracles import composite_gauss, dense_gram, periodic_basis
from serre_galerkin.assembly import mass_matrix, weighted_grad_form
from serre_galerkin.picard import l2_h1_norms
from serre_galerkin.serre import (
    PositivityViolation,
    SolverConfig,
    State,
    assemble_A,
    energy,
    initial_state,
    mass,
    n_steps_for,
    rhs,
    rk4_step,
    simulate,
)
from serre_galerkin.splines import SplineFn, SplineSpace, constant


def wave(a, b):
    return (lambda x: 1 + a * np.sin(2 * np.pi * x), lambda x: b * np.sin(2 * np.pi * x + 0.3))


def random_state(rng, sp, floor=0.6):
    eta = SplineFn(sp, floor + rng.uniform(0, 0.8, sp.N))
    u = SplineFn(sp, rng.normal(scale=0.3, size=sp.N))
    return State(eta, u, 0.0)


def test_config_defaults_and_validation():
    cfg = SolverConfig(c0=0.8)
    assert cfg.depth_floor == pytest.approx(0.1)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(c0=-1.0)


def test_state_requires_shared_space():
    with pytest.raises(ValueError):
        State(constant(SplineSpace(3, 9)), constant(SplineSpace(3, 10)))


def test_A_unit_depth_is_mass_plus_third_stiffness():
    sp = SplineSpace(3, 16)
    A = assemble_A(constant(sp))
    ref = dense_gram(3, 16, 0, 0) + dense_gram(3, 16, 1, 1) / 3
    assert np.allclose(A.to_dense(), ref, atol=1e-12)
    c = np.full(16, 0.7)
    x = np.linalg.solve(A.to_dense(), mass_matrix(sp) @ c)
    assert np.allclose(x, c, atol=1e-12)


def test_A_symmetric_and_rejects_nonpositive_depth(rng):
    sp = SplineSpace(4, 20)
    st = random_state(rng, sp)
    A = assemble_A(st.eta)
    assert A.is_symmetric()
    assert np.array_equal(A.to_dense(), A.to_dense().T)
    bad = SplineFn(sp, np.where(np.arange(20) == 5, -2.0, 1.0))
    with pytest.raises(PositivityViolation) as exc:
        assemble_A(bad)
    assert 5 / 20 <= exc.value.x <= 9 / 20 and exc.value.value < 0


def test_coercivity_100_draws(rng):
    c0, sp = 0.5, SplineSpace(3, 32)
    K = max(1 / c0, 3 / c0**3)
    violations = 0
    for _ in range(100):
        v = c0 + np.abs(rng.normal(scale=0.5, size=32))
        v[rng.integers(32)] = c0
        w = rng.normal(size=32) * rng.uniform(0.01, 10)
        A = assemble_A(SplineFn(sp, v))
        _, h1 = l2_h1_norms(sp, w)
        violations += not h1[0] ** 2 <= K * (w @ (A @ w))
    assert violations == 0


def test_steady_state_rhs_zero_and_rk4_fixed():
    sp = SplineSpace(3, 16)
    st = State(constant(sp, 1.3), sp.zeros(), 0.0)
    cfg = SolverConfig(dt=0.01)
    de, du = rhs(st, cfg)
    assert np.max(np.abs(de)) <= 1e-14 and np.max(np.abs(du)) <= 1e-14
    new = rk4_step(st, cfg, 0.01)
    assert np.max(np.abs(new.eta.coeffs - st.eta.coeffs)) <= 1e-14
    assert np.max(np.abs(new.u.coeffs)) <= 1e-14
    assert new.t == pytest.approx(0.01)


@pytest.mark.parametrize("r", [3, 4])
def test_rhs_weak_form_identity_dense_oracle(r, rng):
    N = 16
    sp = SplineSpace(r, N)
    st = random_state(rng, sp)
    _, udot = rhs(st, SolverConfig())
    x, w = composite_gauss(N, per_cell=3 * r + 2)
    B = [periodic_basis(r, N, x, d) for d in range(3)]
    e, ex = B[0] @ st.eta.coeffs, B[1] @ st.eta.coeffs
    u, ux, uxx = (B[d] @ st.u.coeffs for d in range(3))
    ud, udx = B[0] @ udot, B[1] @ udot
    for _ in range(10):
        chi = rng.normal(size=N)
        c0, c1 = B[0] @ chi, B[1] @ chi
        val = np.sum(w * (e * ud * c0 + e**3 * udx * c1 / 3 + (e * ex + e * u * ux) * c0
                          + e**3 * (u * uxx - ux**2) * c1 / 3))
        assert abs(val) <= 1e-9


def test_rhs_eta_equation_dense_oracle(rng):
    r, N = 3, 16
    sp = SplineSpace(r, N)
    st = random_state(rng, sp)
    edot, _ = rhs(st, SolverConfig())
    x, w = composite_gauss(N, per_cell=10)
    B0, B1 = periodic_basis(r, N, x), periodic_basis(r, N, x, 1)
    flux_x = (B1 @ st.eta.coeffs) * (B0 @ st.u.coeffs) + (B0 @ st.eta.coeffs) * (B1 @ st.u.coeffs)
    assert np.allclose(dense_gram(r, N, 0, 0) @ edot, -(B0.T @ (w * flux_x)), atol=1e-11)


def test_positivity_violation_from_rhs():
    sp = SplineSpace(3, 16)
    st = initial_state(sp, lambda x: 1 + 0.95 * np.sin(2 * np.pi * x), lambda x: 0 * x)
    with pytest.raises(PositivityViolation) as exc:
        rhs(st, SolverConfig(c0=1.0))
    rep = exc.value.report()
    assert set(rep) == {"t", "x", "value", "floor"}
    assert rep["value"] < rep["floor"] == 0.125
    assert abs(rep["x"] - 0.75) < 0.1


def test_simulate_stops_cleanly_on_violation():
    sp = SplineSpace(3, 16)
    res = simulate(sp, (lambda x: 1 + 0.95 * np.sin(2 * np.pi * x), lambda x: 0 * x),
                   SolverConfig(c0=1.0, dt=0.01, t_end=0.1))
    assert res.violation is not None and res.violation["t"] == 0.0
    assert len(res.times) == 1


def test_simulate_rejects_r2():
    with pytest.raises(ValueError):
        simulate(SplineSpace(2, 8), wave(0.1, 0.0), SolverConfig(t_end=0.1))


def test_n_steps_for():
    assert n_steps_for(0.2, 0.05) == (4, pytest.approx(0.05))
    n, dt = n_steps_for(0.2, 0.03)
    assert n == 7 and n * dt == pytest.approx(0.2)


def test_mass_conserved_and_depth_floor():
    sp = SplineSpace(3, 64)
    cfg = SolverConfig(c0=0.9, dt=sp.h / 10, t_end=0.5)
    res = simulate(sp, wave(0.1, 0.0), cfg)
    assert res.violation is None
    assert np.max(np.abs(res.mass - res.mass[0])) <= 1e-10
    assert res.min_depth.min() >= 0.9 / 8
    assert np.all(res.energy > 0)
    assert res.times[-1] == pytest.approx(0.5)
    assert len(res.states) == 2


def test_steady_trajectory_constant():
    sp = SplineSpace(4, 20)
    res = simulate(sp, (lambda x: 0 * x + 1.0, lambda x: 0 * x), SolverConfig(dt=0.01, t_end=0.1),
                   keep_states=True)
    assert len(res.states) == 11
    assert np.ptp(res.energy) <= 1e-12
    for s in res.states:
        assert np.max(np.abs(s.eta.coeffs - 1.0)) <= 1e-13


def test_energy_definition(rng):
    sp = SplineSpace(3, 16)
    st = random_state(rng, sp)
    x, w = composite_gauss(16, 12)
    e = periodic_basis(3, 16, x) @ st.eta.coeffs
    u = periodic_basis(3, 16, x) @ st.u.coeffs
    ux = periodic_basis(3, 16, x, 1) @ st.u.coeffs
    ref = np.sum(w * (e * e + e * u * u + e**3 * ux * ux / 3))
    assert energy(st, q=8).value == pytest.approx(ref, rel=1e-12)
    assert mass(st.eta) == pytest.approx(np.sum(w * e), rel=1e-12)


def test_rk4_temporal_order():
    sp = SplineSpace(3, 16)
    T = 0.2
    init = wave(0.2, 0.2)

    def final(dt):
        return simulate(sp, init, SolverConfig(dt=dt, t_end=T)).final

    ref = final(0.02 / 32)
    dts = [0.02, 0.01, 0.005, 0.0025]
    errs = [np.max(np.abs(final(dt).u.coeffs - ref.u.coeffs)) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.3)


def test_default_time_step_below_spatial_error():
    sp = SplineSpace(3, 32)
    a = simulate(sp, wave(0.1, 0.1), SolverConfig(dt=sp.h / 10, t_end=0.2)).final
    b = simulate(sp, wave(0.1, 0.1), SolverConfig(dt=sp.h / 20, t_end=0.2)).final
    assert np.max(np.abs(a.eta.coeffs - b.eta.coeffs)) < 1e-8


def test_spatial_self_convergence():
    T, r = 0.1, 3
    init = wave(0.1, 0.1)
    Ns = [16, 32, 64]
    fine = simulate(SplineSpace(r, 256), init, SolverConfig(dt=1 / 2560, t_end=T)).final.eta
    x, w = composite_gauss(256, 4)
    errs = []
    for N in Ns:
        sp = SplineSpace(r, N)
        eta = simulate(sp, init, SolverConfig(dt=sp.h / 10, t_end=T)).final.eta
        errs.append(np.sqrt(np.sum(w * (eta(x) - fine(x)) ** 2)))
    slope = np.polyfit(np.log(1 / np.array(Ns)), np.log(errs), 1)[0]
    assert slope >= r - 0.4
