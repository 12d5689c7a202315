"""Quasiinterpolation from nodal samples and probes of its superconvergence.

``Q_h v = sum_j v(x_j) Phi_j`` where each ``Phi_j = sum_d c_d B(. - x_j - d h)``
is a short symmetric combination of B-splines centred near the node
``x_j``. ``d`` runs over integers for even ``r`` and half-integers for odd
``r`` (the B-spline centres sit at knots or at cell midpoints respectively).

The mask ``c`` is fixed by matching the symbol ``sum_d c_d cos(xi d)`` to
``((xi/2) / sin(xi/2))^r``, the reciprocal of the B-spline symbol, through
``xi^D``. With ``D = r - 1`` this is plain polynomial reproduction; the
default ``D = 2r - 2`` also makes the generating kernel's moments vanish
through order ``2r - 2``, which is what the inner-product superconvergence
probes below require.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import sympy

from .assembly import bilinear_form, mass_matrix
from .splines import SplineFn, SplineSpace

__all__ = [
    "QIMask",
    "derive_mask",
    "default_mask",
    "apply",
    "quasi_interpolate",
    "dual_pairings",
    "probe_superconvergence",
    "probe_product",
]


@dataclass(frozen=True)
class QIMask:
    """Symmetric mask; ``offsets`` are centre displacements in units of ``h``."""

    r: int
    offsets: tuple
    coeffs: tuple
    degree: int

    @property
    def shifts(self) -> np.ndarray:
        """Index shift of the B-spline carrying each mask entry."""
        return np.rint(np.asarray(self.offsets) - self.r / 2).astype(int)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def __len__(self):
        return len(self.coeffs)


@lru_cache(maxsize=None)
def derive_mask(r: int, degree: int | None = None) -> QIMask:
    """Shortest symmetric mask whose symbol matches the inverse B-spline symbol.

    Parameters
    ----------
    r : int
        Spline order, 2..8.
    degree : int, optional
        Highest power of ``xi`` matched. ``r - 1`` gives the minimal
        polynomial-reproducing mask; the default ``2r - 2`` gives the
        superconvergent one.
    """
    if not 2 <= r <= 8:
        raise ValueError(f"mask order must satisfy 2 <= r <= 8, got {r}")
    D = 2 * r - 2 if degree is None else int(degree)
    if D < 0:
        raise ValueError("degree must be non-negative")
    n = D // 2 + 1
    half = sympy.Rational(1, 2) if r % 2 else sympy.Integer(0)
    ds = [half + k for k in range(n)]

    xi = sympy.symbols("xi")
    target = sympy.series(((xi / 2) / sympy.sin(xi / 2)) ** r, xi, 0, 2 * n).removeO()
    rows, rhs = [], []
    for m in range(n):
        row = []
        for d in ds:
            mult = 1 if d == 0 else 2
            row.append(mult * (-1) ** m * d ** (2 * m) / sympy.factorial(2 * m))
        rows.append(row)
        rhs.append(target.coeff(xi, 2 * m))
    A = sympy.Matrix(rows)
    if A.det() == 0:
        raise np.linalg.LinAlgError(f"moment system singular for r={r}, degree={D}")
    sol = A.LUsolve(sympy.Matrix(rhs))

    offsets, coeffs = [], []
    for d, c in zip(ds, sol):
        if d == 0:
            offsets.append(0.0)
            coeffs.append(float(c))
        else:
            offsets = [-float(d)] + offsets + [float(d)]
            coeffs = [float(c)] + coeffs + [float(c)]
    return QIMask(r, tuple(offsets), tuple(coeffs), D)


def default_mask(r: int) -> QIMask:
    return derive_mask(r)


def apply(space: SplineSpace, mask: QIMask, samples) -> SplineFn:
    """Spline with coefficients given by the cyclic convolution of samples and mask."""
    v = np.asarray(samples, dtype=float)
    if v.shape != (space.N,):
        raise ValueError(f"expected {space.N} nodal samples, got shape {v.shape}")
    if mask.r != space.r:
        raise ValueError(f"mask of order {mask.r} used with space of order {space.r}")
    a = np.zeros(space.N)
    for c, s in zip(mask.coeffs, mask.shifts):
        a += c * np.roll(v, s)
    return SplineFn(space, a)


def quasi_interpolate(space: SplineSpace, v, mask: QIMask | None = None) -> SplineFn:
    """``Q_h v`` from a callable ``v(x)`` sampled at the knots ``x_j = j h``."""
    mask = default_mask(space.r) if mask is None else mask
    return apply(space, mask, np.asarray(v(space.knots), dtype=float))


def dual_pairings(mask: QIMask, vec: np.ndarray) -> np.ndarray:
    """Turn ``vec[m] = (g, B_m)`` into ``(g, Phi_i)`` for every node ``i``."""
    out = np.zeros_like(np.asarray(vec, dtype=float))
    for c, s in zip(mask.coeffs, mask.shifts):
        out += c * np.roll(vec, -s)
    return out


def _check_orders(space: SplineSpace, nu: int, kappa: int) -> None:
    if nu < 0 or kappa < 0 or nu + kappa > space.r - 1:
        raise ValueError(f"need nu, kappa >= 0 and nu + kappa <= r - 1 = {space.r - 1}; got {nu}, {kappa}")


def probe_superconvergence(space: SplineSpace, mask: QIMask, w, nu: int, kappa: int) -> float:
    """``max_i |((Q_h w)^(nu), Phi_i^(kappa)) - (-1)^kappa h w^(nu+kappa)(x_i)|``.

    ``w`` is called as ``w(x, d)``. The pairings are exact: the integrands are
    piecewise polynomials of degree at most ``2r - 2``.
    """
    _check_orders(space, nu, kappa)
    a = quasi_interpolate(space, lambda x: w(x, 0), mask).coeffs
    G = bilinear_form(space, 1.0, kappa, nu, q=space.r)
    lhs = dual_pairings(mask, G @ a)
    b = lhs - (-1) ** kappa * space.h * w(space.knots, nu + kappa)
    return float(np.max(np.abs(b)))


def probe_product(space: SplineSpace, mask: QIMask, f, g, nu: int, kappa: int,
                  q: int | None = None) -> float:
    """``max_i |(f (Q_h g)^(nu), Phi_i^(kappa)) - (-1)^kappa (Q_h[(f g^(nu))^(kappa)], Phi_i)|``.

    The first pairing has a non-polynomial weight ``f``; it is integrated with
    ``q`` Gauss points per cell (default ``2r + 8``).
    """
    _check_orders(space, nu, kappa)
    q = 2 * space.r + 8 if q is None else q
    a = quasi_interpolate(space, lambda x: g(x, 0), mask).coeffs
    G = bilinear_form(space, lambda x: f(x, 0), kappa, nu, q=q)
    first = dual_pairings(mask, G @ a)

    def z(x):
        return sum(comb(kappa, m) * f(x, kappa - m) * g(x, nu + m) for m in range(kappa + 1))

    qz = quasi_interpolate(space, z, mask).coeffs
    second = dual_pairings(mask, mass_matrix(space) @ qz)
    return float(np.max(np.abs(first - (-1) ** kappa * second)))
