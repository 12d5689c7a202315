"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline


def cox_de_boor(x, knots, r):
    """Order-``r`` B-spline on ``knots[0..r]`` by the classical recursion."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(knots, dtype=float)

    def rec(i, k):
        if k == 1:
            return ((t[i] <= x) & (x < t[i + 1])).astype(float)
        left = (x - t[i]) / (t[i + k - 1] - t[i]) * rec(i, k - 1)
        right = (t[i + k] - x) / (t[i + k] - t[i + 1]) * rec(i + 1, k - 1)
        return left + right

    return rec(0, r)


def periodic_basis(r, N, x, deriv=0):
    """Matrix ``B[p, j] = B_j^(deriv)(x_p)`` with ``B_j`` supported on ``[jh, (j+r)h]`` mod 1."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    h = 1.0 / N
    out = np.zeros((x.size, N))
    for j in range(N):
        b = BSpline.basis_element(h * (j + np.arange(r + 1)), extrapolate=False)
        if deriv:
            b = b.derivative(deriv)
        for shift in (-1.0, 0.0):
            v = b(x - shift)
            out[:, j] += np.nan_to_num(v)
    return out


def composite_gauss(N, per_cell=12, cells_per_interval=1):
    """Composite Gauss nodes/weights on [0, 1] aligned with the mesh."""
    g, w = np.polynomial.legendre.leggauss(per_cell)
    h = 1.0 / N
    x = (np.arange(N)[:, None] + 0.5 * (g[None, :] + 1.0)) * h
    ww = np.tile(0.5 * w * h, (N, 1))
    return x.ravel(), ww.ravel()


def dense_gram(r, N, d_test, d_trial, weight=None, per_cell=12):
    x, w = composite_gauss(N, per_cell)
    Bt = periodic_basis(r, N, x, d_test)
    Bs = periodic_basis(r, N, x, d_trial)
    wv = w if weight is None else w * weight(x)
    return Bt.T @ (wv[:, None] * Bs)


def dense_load(r, N, v, deriv=0, per_cell=12):
    x, w = composite_gauss(N, per_cell)
    return periodic_basis(r, N, x, deriv).T @ (w * v(x))


def fourier_b(r, N, nu, kappa, mask_coeffs, mask_offsets):
    """``max_i |b_i|`` for ``w = sin(2 pi x)`` from the Fourier symbol.

    On a uniform periodic mesh a single Fourier mode is an eigenvector of every
    operator in the probe, so ``b`` reduces to ``h |w^(nu+kappa)| * |m(xi) - 1|``
    with ``xi = 2 pi h`` and
    ``m(xi) = c(xi)^2 * sum_l (xi/(xi + 2 pi l))^(nu+kappa) sinc^{2r}((xi + 2 pi l)/2)``
    (up to the sign convention of each derivative, which enters as ``i^(nu+kappa)``
    on both sides).
    """
    h = 1.0 / N
    xi = 2 * np.pi * h
    c = sum(cd * np.cos(xi * d) for cd, d in zip(mask_coeffs, mask_offsets))
    ell = np.arange(-400, 401)
    z = xi + 2 * np.pi * ell
    sinc = np.sinc(z / (2 * np.pi))  # sin(z/2)/(z/2)
    G = np.sum((z / xi) ** (nu + kappa) * sinc ** (2 * r))
    amp = (2 * np.pi) ** (nu + kappa)
    return h * amp * abs(c * c * G - 1.0)
