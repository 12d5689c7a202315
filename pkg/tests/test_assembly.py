import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_gram, dense_load, periodic_basis
from serre_galerkin.assembly import (
    BandedCyclicMatrix,
    CyclicFactorization,
    SingularMatrixError,
    bilinear_form,
    cell_tables,
    f_h,
    gauss_rule,
    grad_load,
    inner,
    l2_project,
    load,
    mass_matrix,
    quad_values,
    solve_banded_cyclic,
    weighted_grad_form,
    weighted_mass,
)
from serre_galerkin.splines import SplineFn, SplineSpace, norms


def test_gauss_rule_exactness():
    for q in (1, 3, 6):
        rule = gauss_rule(q)
        for p in range(2 * q):
            assert np.dot(rule.weights, rule.points**p) == pytest.approx(1 / (p + 1), abs=1e-14)
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_mass_stencil_r3():
    M = mass_matrix(SplineSpace(3, 20)).to_dense()
    row = np.roll(M[10], -8)[:5] * 120 * 20
    assert np.allclose(row, [1, 26, 66, 26, 1])
    assert np.allclose(M.sum(axis=1), 1 / 20)


@pytest.mark.parametrize("r,N", [(2, 8), (3, 12), (4, 16)])
@pytest.mark.parametrize("dt,ds", [(0, 0), (1, 0), (1, 1), (0, 1)])
def test_bilinear_forms_vs_dense_oracle(r, N, dt, ds):
    w = lambda x: 1.5 + np.sin(2 * np.pi * x)  # noqa: E731
    A = bilinear_form(SplineSpace(r, N), w, dt, ds, q=10).to_dense()
    assert np.allclose(A, dense_gram(r, N, dt, ds, w), atol=1e-10 * N ** (dt + ds))


def test_weighted_forms_symmetric_and_scaled():
    sp = SplineSpace(4, 16)
    w = lambda x: 2 + np.cos(2 * np.pi * x)  # noqa: E731
    M = weighted_mass(sp, w)
    S = weighted_grad_form(sp, w)
    assert M.is_symmetric() and S.is_symmetric()
    assert np.allclose(S.to_dense(), dense_gram(4, 16, 1, 1, w) / 3, atol=1e-10)


def test_load_and_grad_load_vs_oracle():
    r, N = 3, 12
    sp = SplineSpace(r, N)
    v = lambda x: np.exp(np.sin(2 * np.pi * x))  # noqa: E731
    assert np.allclose(load(sp, v, q=10), dense_load(r, N, v, 0, per_cell=10), atol=1e-13)
    assert np.allclose(grad_load(sp, v, q=10), dense_load(r, N, v, 1, per_cell=10) / 3, atol=1e-11)


@given(st.integers(1, 4), st.integers(0, 30), st.integers(0, 2**31 - 1))
def test_cyclic_solve_matches_dense(bw, n_extra, seed):
    rng = np.random.default_rng(seed)
    n = 2 * bw + 2 + n_extra
    bands = rng.normal(size=(2 * bw + 1, n))
    bands[bw] += 4 * (2 * bw + 1)  # diagonally dominant
    A = BandedCyclicMatrix(bands)
    b = rng.normal(size=n)
    x = solve_banded_cyclic(A, b)
    assert np.allclose(A.to_dense() @ x, b, atol=1e-10)
    assert np.allclose(x, np.linalg.solve(A.to_dense(), b), atol=1e-10)
    assert np.allclose(A @ x, b, atol=1e-10)


def test_dense_roundtrip_and_algebra(rng):
    n, bw = 10, 2
    bands = rng.normal(size=(2 * bw + 1, n))
    A = BandedCyclicMatrix(bands)
    D = A.to_dense()
    assert np.allclose(BandedCyclicMatrix.from_dense(D, bw).to_dense(), D)
    assert np.allclose(A.transpose().to_dense(), D.T)
    assert np.allclose((A + A * 2.0).to_dense(), 3 * D)
    assert np.allclose(BandedCyclicMatrix.identity(n, 1).to_dense(), np.eye(n))
    X = rng.normal(size=(n, 3))
    assert np.allclose(A @ X, D @ X)
    assert A.norm_inf() == pytest.approx(np.abs(D).sum(axis=1).max())


def test_singular_matrix_reported():
    n = 12
    bands = np.zeros((3, n))
    bands[0], bands[1], bands[2] = -1, 2, -1  # periodic Laplacian, constants in kernel
    with pytest.raises(SingularMatrixError) as exc:
        CyclicFactorization(BandedCyclicMatrix(bands, symmetric=True))
    assert exc.value.pivot >= 0


def test_solve_rejects_wrong_length():
    fac = CyclicFactorization(mass_matrix(SplineSpace(3, 10)))
    with pytest.raises(ValueError):
        fac.solve(np.ones(9))


def test_l2_projection_orthogonality_and_rate():
    v = lambda x: np.sin(2 * np.pi * x) + 0.2 * np.cos(6 * np.pi * x)  # noqa: E731
    errs = []
    for N in (16, 32, 64):
        sp = SplineSpace(3, N)
        P = l2_project(sp, v, q=8)
        # residual orthogonal to every basis function
        resid = load(sp, v, q=8) - load(sp, P(cell_tables(sp, 8).x), q=8)
        assert np.max(np.abs(resid)) < 1e-13
        tab = cell_tables(sp, 8)
        errs.append(np.sqrt(np.sum((quad_values(P, 0, 8) - v(tab.x)) ** 2 * tab.w)))
    slope = np.polyfit(np.log([1 / 16, 1 / 32, 1 / 64]), np.log(errs), 1)[0]
    assert 2.8 < slope < 3.4


def test_f_h_defining_identity(rng):
    sp = SplineSpace(4, 16)
    v = lambda x: np.cos(2 * np.pi * x) ** 3 + x * 0  # noqa: E731
    F = f_h(sp, v, q=10)
    for _ in range(5):
        phi = SplineFn(sp, rng.normal(size=16))
        x, w = cell_tables(sp, 10).x, cell_tables(sp, 10).w
        lhs = inner(F, phi, sp, q=10)
        rhs = np.sum(v(x) * quad_values(phi, 1, 10) * w) / 3
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_quad_values_batch(rng):
    sp = SplineSpace(3, 10)
    C = rng.normal(size=(4, 10))
    batch = quad_values(C, 1, space=sp)
    for k in range(4):
        assert np.allclose(batch[k], quad_values(SplineFn(sp, C[k]), 1))


def test_mass_gram_norm_consistent(rng):
    sp = SplineSpace(3, 14)
    c = rng.normal(size=14)
    f = SplineFn(sp, c)
    assert np.sqrt(c @ (mass_matrix(sp) @ c)) == pytest.approx(norms(f)["l2"], rel=1e-12)


def test_weights_from_array_and_scalar():
    sp = SplineSpace(3, 10)
    x = cell_tables(sp).x
    w = 1 + x
    A1 = weighted_mass(sp, w).to_dense()
    A2 = weighted_mass(sp, lambda y: 1 + y).to_dense()
    assert np.allclose(A1, A2)
    assert np.allclose(weighted_mass(sp, 2.0).to_dense(), 2 * weighted_mass(sp, 1.0).to_dense())
