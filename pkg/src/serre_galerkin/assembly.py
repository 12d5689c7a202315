"""Galerkin matrices and load vectors on periodic splines, with cyclic banded solves.

All integrals are per-cell Gauss-Legendre sums. Coefficient functions enter
either as callables of ``x`` or as arrays of values at the quadrature points
(shape ``(N, q)``), which is how the solver passes pointwise products of
splines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .splines import SplineFn, SplineSpace

__all__ = [
    "QuadRule",
    "BandedCyclicMatrix",
    "CyclicFactorization",
    "SingularMatrixError",
    "gauss_rule",
    "default_q",
    "cell_tables",
    "quad_values",
    "weighted_mass",
    "weighted_grad_form",
    "bilinear_form",
    "load",
    "grad_load",
    "mass_matrix",
    "mass_factor",
    "l2_project",
    "f_h",
    "solve_banded_cyclic",
    "inner",
]


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, msg: str, pivot: float):
        super().__init__(f"{msg} (pivot magnitude {pivot:.3e})")
        self.pivot = pivot


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on the reference cell [0, 1]."""

    q: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@lru_cache(maxsize=None)
def gauss_rule(q: int) -> QuadRule:
    if not 1 <= q <= 30:
        raise ValueError(f"number of Gauss points must be in [1, 30], got {q}")
    x, w = np.polynomial.legendre.leggauss(q)
    pts, wts = 0.5 * (x + 1.0), 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadRule(q, pts, wts)


def default_q(space: SplineSpace) -> int:
    # exact for every polynomial integrand of the Serre forms; the worst one,
    # eta^3 (u u_xx - u_x^2) phi', has degree 6r - 9
    return max(space.r + 2, 3 * space.r - 4)


@dataclass(frozen=True)
class CellTables:
    space: SplineSpace
    rule: QuadRule
    x: np.ndarray  # (N, q) physical quadrature points
    w: np.ndarray  # (q,) physical weights, h * reference weights
    basis: tuple  # basis[d] has shape (q, r): d-th x-derivative of local pieces


@lru_cache(maxsize=64)
def cell_tables(space: SplineSpace, q: int | None = None) -> CellTables:
    q = default_q(space) if q is None else q
    rule = gauss_rule(q)
    x = (np.arange(space.N)[:, None] + rule.points[None, :]) * space.h
    basis = tuple(space.local_table(rule.points, d) * float(space.N) ** d for d in range(space.r))
    return CellTables(space, rule, x, rule.weights * space.h, basis)


def quad_values(f: SplineFn | np.ndarray, d: int = 0, q: int | None = None, space=None) -> np.ndarray:
    """Values of the ``d``-th derivative of a spline at the quadrature points."""
    if isinstance(f, SplineFn):
        space, c = f.space, f.coeffs
    else:
        c = np.asarray(f)
    if d > space.r - 1:
        raise ValueError(f"derivative order {d} unsupported for order r={space.r}")
    tab = cell_tables(space, q)
    return c[..., space.gather_index()] @ tab.basis[d].T


def _weights_at(space: SplineSpace, w, q: int | None) -> np.ndarray:
    tab = cell_tables(space, q)
    if callable(w):
        vals = np.asarray(w(tab.x), dtype=float)
        return np.broadcast_to(vals, tab.x.shape)
    vals = np.asarray(w, dtype=float)
    if vals.ndim == 0:
        return np.full(tab.x.shape, float(vals))
    if vals.shape != tab.x.shape:
        raise ValueError(f"coefficient values must have shape {tab.x.shape}, got {vals.shape}")
    return vals


class BandedCyclicMatrix:
    """Square matrix whose nonzeros lie within cyclic distance ``bw`` of the diagonal.

    ``bands[o + bw, i]`` stores entry ``(i, (i + o) mod n)`` for
    ``o = -bw..bw``; the wrap-around corners are therefore ordinary entries.
    """

    def __init__(self, bands: np.ndarray, symmetric: bool = False):
        bands = np.asarray(bands, dtype=float)
        if bands.ndim != 2 or bands.shape[0] % 2 != 1:
            raise ValueError("bands must have shape (2*bw+1, n)")
        self.bands = bands
        self.bw = (bands.shape[0] - 1) // 2
        self.n = bands.shape[1]
        if self.n <= 2 * self.bw:
            raise ValueError(f"dimension {self.n} too small for half-bandwidth {self.bw}")
        self.symmetric = symmetric

    @classmethod
    def identity(cls, n: int, bw: int = 0) -> "BandedCyclicMatrix":
        b = np.zeros((2 * bw + 1, n))
        b[bw] = 1.0
        return cls(b, symmetric=True)

    @classmethod
    def from_dense(cls, A: np.ndarray, bw: int, symmetric: bool = False) -> "BandedCyclicMatrix":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        i = np.arange(n)
        bands = np.stack([A[i, (i + o) % n] for o in range(-bw, bw + 1)])
        return cls(bands, symmetric=symmetric)

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        i = np.arange(self.n)
        for o in range(-self.bw, self.bw + 1):
            A[i, (i + o) % self.n] += self.bands[o + self.bw]
        return A

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x)
        for o in range(-self.bw, self.bw + 1):
            b = self.bands[o + self.bw]
            y += (b if x.ndim == 1 else b[:, None]) * np.roll(x, -o, axis=0)
        return y

    def __add__(self, other: "BandedCyclicMatrix") -> "BandedCyclicMatrix":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        bw = max(self.bw, other.bw)
        out = np.zeros((2 * bw + 1, self.n))
        out[bw - self.bw : bw + self.bw + 1] += self.bands
        out[bw - other.bw : bw + other.bw + 1] += other.bands
        return BandedCyclicMatrix(out, symmetric=self.symmetric and other.symmetric)

    def __mul__(self, a: float) -> "BandedCyclicMatrix":
        return BandedCyclicMatrix(a * self.bands, symmetric=self.symmetric)

    __rmul__ = __mul__

    def transpose(self) -> "BandedCyclicMatrix":
        n, bw = self.n, self.bw
        out = np.empty_like(self.bands)
        for o in range(-bw, bw + 1):
            # A^T[i, i+o] = A[i+o, i], stored at bands[-o, i+o]
            out[o + bw] = np.roll(self.bands[-o + bw], -o)
        return BandedCyclicMatrix(out, symmetric=self.symmetric)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.bands, self.transpose().bands))

    def norm_inf(self) -> float:
        return float(np.max(np.sum(np.abs(self.bands), axis=0)))

    def __repr__(self):
        return f"BandedCyclicMatrix(n={self.n}, bw={self.bw}, symmetric={self.symmetric})"


class CyclicFactorization:
    """LU of the non-wrapping band plus a Woodbury correction for the corners."""

    def __init__(self, A: BandedCyclicMatrix):
        n, bw = A.n, A.bw
        self.n, self.bw = n, bw
        ab = np.zeros((3 * bw + 1, n))
        corner_rows, corner_cols, corner_vals = [], [], []
        i = np.arange(n)
        for o in range(-bw, bw + 1):
            j = i + o
            inside = (j >= 0) & (j < n)
            ab[2 * bw - o, j[inside]] = A.bands[o + bw, inside]
            if not inside.all():
                corner_rows.append(i[~inside])
                corner_cols.append(j[~inside] % n)
                corner_vals.append(A.bands[o + bw, ~inside])
        lub, piv, info = lapack.dgbtrf(ab, bw, bw)
        diag = np.abs(lub[2 * bw])
        scale = max(A.norm_inf(), np.finfo(float).tiny)
        if info > 0 or diag.min() <= 1e-14 * scale:
            raise SingularMatrixError("banded part is numerically singular", float(diag.min()))
        self._lub, self._piv = lub, piv
        self._R = None
        if bw and corner_rows:
            R = np.concatenate([np.arange(bw), np.arange(n - bw, n)])
            pos = {int(r): k for k, r in enumerate(R)}
            K = np.zeros((len(R), len(R)))
            for rows, cols, vals in zip(corner_rows, corner_cols, corner_vals):
                for a, b, v in zip(rows, cols, vals):
                    K[pos[int(a)], pos[int(b)]] += v
            E = np.zeros((n, len(R)))
            E[R, np.arange(len(R))] = 1.0
            Z = self._band_solve(E @ K)
            cap = np.eye(len(R)) + Z[R]
            lu, cpiv = lu_factor(cap, check_finite=False)
            cdiag = np.abs(np.diag(lu))
            if cdiag.min() <= 1e-13 * max(1.0, cdiag.max()):
                raise SingularMatrixError("cyclic matrix is numerically singular", float(cdiag.min()))
            self._R, self._Z, self._cap = R, Z, (lu, cpiv)

    def _band_solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dgbtrs(self._lub, self.bw, self.bw, b, self._piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"dgbtrs failed with info={info}")
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        y = self._band_solve(b)
        if self._R is None:
            return y
        corr = lu_solve(self._cap, y[self._R], check_finite=False)
        return y - self._Z @ corr


def solve_banded_cyclic(A: BandedCyclicMatrix, b: np.ndarray) -> np.ndarray:
    return CyclicFactorization(A).solve(b)


def bilinear_form(space: SplineSpace, w, d_test: int, d_trial: int, q: int | None = None,
                  scale: float = 1.0) -> BandedCyclicMatrix:
    """Matrix of ``scale * (w B_j^(d_trial), B_i^(d_test))``; row ``i`` tests."""
    tab = cell_tables(space, q)
    wv = _weights_at(space, w, q) * tab.w[None, :] * scale
    local = np.einsum("ig,gk,gl->ikl", wv, tab.basis[d_test], tab.basis[d_trial])
    r, N = space.r, space.N
    bw = r - 1
    bands = np.zeros((2 * bw + 1, N))
    for k in range(r):
        for l in range(r):
            # row (i - k), column (i - l): offset k - l
            bands[k - l + bw] += np.roll(local[:, k, l], -k)
    sym = d_test == d_trial
    A = BandedCyclicMatrix(bands, symmetric=sym)
    if sym:
        # exact symmetry: average with the transpose (differs only by rounding)
        A = BandedCyclicMatrix(0.5 * (A.bands + A.transpose().bands), symmetric=True)
    return A


def weighted_mass(space: SplineSpace, w=1.0, q: int | None = None) -> BandedCyclicMatrix:
    return bilinear_form(space, w, 0, 0, q)


def weighted_grad_form(space: SplineSpace, w=1.0, q: int | None = None) -> BandedCyclicMatrix:
    """Matrix of ``(1/3) (w B_j', B_i')``."""
    return bilinear_form(space, w, 1, 1, q, scale=1.0 / 3.0)


def _scatter(space: SplineSpace, local: np.ndarray) -> np.ndarray:
    idx = space.gather_index()
    return np.bincount(idx.ravel(), weights=local.ravel(), minlength=space.N)


def load(space: SplineSpace, v, q: int | None = None) -> np.ndarray:
    """Vector ``(v, B_i)``."""
    tab = cell_tables(space, q)
    vals = _weights_at(space, v, q) * tab.w[None, :]
    return _scatter(space, vals @ tab.basis[0])


def grad_load(space: SplineSpace, v, q: int | None = None) -> np.ndarray:
    """Vector ``(1/3) (v, B_i')``."""
    tab = cell_tables(space, q)
    vals = _weights_at(space, v, q) * tab.w[None, :]
    return _scatter(space, vals @ tab.basis[1]) / 3.0


@lru_cache(maxsize=64)
def mass_matrix(space: SplineSpace) -> BandedCyclicMatrix:
    # r Gauss points integrate products of two pieces exactly
    return weighted_mass(space, 1.0, q=space.r)


@lru_cache(maxsize=64)
def mass_factor(space: SplineSpace) -> CyclicFactorization:
    return CyclicFactorization(mass_matrix(space))


def l2_project(space: SplineSpace, f, q: int | None = None) -> SplineFn:
    """L2 projection onto the spline space."""
    return SplineFn(space, mass_factor(space).solve(load(space, f, q)))


def f_h(space: SplineSpace, v, q: int | None = None) -> SplineFn:
    """The spline ``F`` with ``(F, phi) = (1/3)(v, phi')`` for every spline ``phi``."""
    return SplineFn(space, mass_factor(space).solve(grad_load(space, v, q)))


def inner(a, b, space: SplineSpace, q: int | None = None) -> float:
    """``(a, b)`` for splines, callables or quadrature-point arrays."""
    tab = cell_tables(space, q)

    def vals(f):
        return quad_values(f, 0, q) if isinstance(f, SplineFn) else _weights_at(space, f, q)

    return float(np.sum(vals(a) * vals(b) * tab.w[None, :]))
