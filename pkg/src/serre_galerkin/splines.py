"""Periodic uniform B-spline spaces on [0, 1].

The space of order ``r`` on ``N`` cells holds 1-periodic piecewise polynomials
of degree ``r - 1`` with ``r - 2`` continuous derivatives. Basis function
``B_j`` is the cardinal B-spline supported on ``[x_j, x_{j+r}]`` (indices mod
``N``), so on cell ``i`` the active functions are ``B_{i-k}``, ``k = 0..r-1``,
and each one restricted to the cell is a fixed polynomial piece of the mother
spline. Everything below is built on those ``r`` pieces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "SplineSpace",
    "SplineFn",
    "build_space",
    "cardinal_pieces",
    "constant",
    "eval_spline",
    "norms",
]

SAMPLES_PER_CELL = 20


@lru_cache(maxsize=None)
def cardinal_pieces(r: int) -> tuple[np.ndarray, ...]:
    """Power-basis coefficients of the mother spline on each unit segment.

    Returns ``r`` arrays; entry ``k`` holds the coefficients (ascending) of
    ``s -> B(s + k)`` for ``s`` in ``[0, 1]``, where ``B`` is the order-``r``
    cardinal B-spline on ``[0, r]``. Uses the truncated-power form
    ``B(x) = sum_m (-1)^m C(r, m) (x - m)_+^{r-1} / (r-1)!``.
    """
    p = r - 1
    pieces = []
    for k in range(r):
        c = np.zeros(r)
        for m in range(k + 1):
            # (s + k - m)^p expanded in powers of s
            shift = k - m
            term = np.array([comb(p, a) * shift ** (p - a) for a in range(p + 1)], dtype=float)
            c += (-1) ** m * comb(r, m) * term
        pieces.append(c / factorial(p))
    return tuple(pieces)


@lru_cache(maxsize=None)
def piece_derivatives(r: int, d: int) -> tuple[np.ndarray, ...]:
    return tuple(P.polyder(c, d) if d else c for c in cardinal_pieces(r))


@dataclass(frozen=True)
class SplineSpace:
    """Order-``r`` periodic splines on a uniform mesh of ``N`` cells."""

    r: int
    N: int

    def __post_init__(self):
        if self.r < 2:
            raise ValueError(f"spline order must be >= 2, got r={self.r}")
        if self.N <= 4 * (self.r - 1):
            raise ValueError(
                f"mesh too coarse: need N > 4(r-1) = {4 * (self.r - 1)}, got N={self.N}"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def dim(self) -> int:
        return self.N

    @property
    def degree(self) -> int:
        return self.r - 1

    @property
    def knots(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    def local_table(self, s: np.ndarray, d: int = 0) -> np.ndarray:
        """Values of the ``d``-th derivative (in ``s``) of each local piece.

        Shape ``(len(s), r)``; column ``k`` belongs to basis ``B_{i-k}``.
        """
        s = np.asarray(s, dtype=float)
        return np.stack([P.polyval(s, c) for c in piece_derivatives(self.r, d)], axis=-1)

    def gather_index(self) -> np.ndarray:
        """Index array ``idx[i, k] = (i - k) mod N`` of active basis per cell."""
        return _gather_index(self.N, self.r)

    def zeros(self) -> "SplineFn":
        return SplineFn(self, np.zeros(self.N))


@lru_cache(maxsize=None)
def _gather_index(N: int, r: int) -> np.ndarray:
    idx = (np.arange(N)[:, None] - np.arange(r)[None, :]) % N
    idx.setflags(write=False)
    return idx


def build_space(r: int, N: int) -> SplineSpace:
    return SplineSpace(int(r), int(N))


@dataclass(frozen=True)
class SplineFn:
    """An element of a :class:`SplineSpace` given by its B-spline coefficients."""

    space: SplineSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.space.N,):
            raise ValueError(f"expected {self.space.N} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x, k: int = 0):
        return eval_spline(self, x, k)

    def __add__(self, other: "SplineFn") -> "SplineFn":
        _same_space(self, other)
        return SplineFn(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "SplineFn") -> "SplineFn":
        _same_space(self, other)
        return SplineFn(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SplineFn":
        return SplineFn(self.space, a * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SplineFn":
        return SplineFn(self.space, -self.coeffs)


def _same_space(a: SplineFn, b: SplineFn) -> None:
    if a.space != b.space:
        raise ValueError("splines live in different spaces")


def constant(space: SplineSpace, value: float = 1.0) -> SplineFn:
    """The constant spline; coefficients all ``value`` by partition of unity."""
    return SplineFn(space, np.full(space.N, float(value)))


def eval_spline(f: SplineFn, x, k: int = 0):
    """Evaluate the ``k``-th derivative of ``f`` at ``x`` (any real, wrapped mod 1)."""
    sp = f.space
    if k < 0 or k > sp.r - 1:
        raise ValueError(f"derivative order k={k} unsupported for order r={sp.r} (need 0 <= k <= r-1)")
    xa = np.asarray(x, dtype=float)
    y = np.mod(xa, 1.0) * sp.N
    cell = np.floor(y).astype(np.int64)
    s = y - cell
    cell %= sp.N
    idx = sp.gather_index()[cell]
    tab = sp.local_table(s, k)
    out = np.sum(f.coeffs[idx] * tab, axis=-1) * float(sp.N) ** k
    return out if xa.ndim else float(out)


def sample_points(space: SplineSpace, per_cell: int = SAMPLES_PER_CELL) -> np.ndarray:
    """Knots plus ``per_cell`` interior points in every cell."""
    s = np.arange(per_cell) / per_cell
    return ((np.arange(space.N)[:, None] + s[None, :]) * space.h).ravel()


def norms(f: SplineFn, per_cell: int = SAMPLES_PER_CELL) -> dict:
    """Integral and sup-type norms of a spline.

    L2 and H1 use a per-cell Gauss rule exact for the squared pieces. The
    sup-norms are maxima over the knots and ``per_cell`` points per cell.
    ``w1inf`` is ``max|f| + max|f'|``.
    """
    sp = f.space
    xg, wg = np.polynomial.legendre.leggauss(sp.r)
    s = 0.5 * (xg + 1.0)
    w = 0.5 * wg
    c = f.coeffs[sp.gather_index()]
    v0 = c @ sp.local_table(s, 0).T
    l2sq = sp.h * np.sum(v0**2 @ w)
    v1 = c @ sp.local_table(s, 1).T * sp.N
    semi = sp.h * np.sum(v1**2 @ w)
    xs = sample_points(sp, per_cell)
    linf = float(np.max(np.abs(eval_spline(f, xs, 0))))
    d1 = float(np.max(np.abs(eval_spline(f, xs, 1))))
    return {
        "l2": float(np.sqrt(l2sq)),
        "h1": float(np.sqrt(l2sq + semi)),
        "linf": linf,
        "w1inf": linf + d1,
    }
