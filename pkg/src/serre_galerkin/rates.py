"""Log-log slope fitting and error norms for convergence studies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import cell_tables, quad_values
from .splines import SplineFn

__all__ = ["fit_rate", "ConvergenceReport", "spline_errors", "superconvergence_order"]


def fit_rate(hs, errs) -> tuple[float, float]:
    """Least-squares slope of ``log(err)`` against ``log(h)``.

    Returns
    -------
    slope, residual
        ``residual`` is the 2-norm of the fit residuals in log space.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if hs.shape != errs.shape or hs.ndim != 1:
        raise ValueError("hs and errs must be 1-d and of equal length")
    if len(hs) < 3:
        raise ValueError(f"slope fit needs at least 3 levels, got {len(hs)}")
    if not np.all(np.diff(hs) < 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if not np.all(hs > 0):
        raise ValueError("mesh sizes must be positive")
    if not np.all(np.isfinite(errs)) or not np.all(errs > 0):
        raise ValueError("errors must be positive and finite for a log-log fit")
    X = np.column_stack([np.log(hs), np.ones_like(hs)])
    y = np.log(errs)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.linalg.norm(X @ coef - y))
    return float(coef[0]), res


def superconvergence_order(r: int, nu: int, kappa: int) -> int:
    """Order ``2r + j - nu - kappa`` with ``j = 1`` (even ``nu + kappa``) or ``2`` (odd)."""
    j = 1 if (nu + kappa) % 2 == 0 else 2
    return 2 * r + j - nu - kappa


def spline_errors(f: SplineFn, exact, q: Optional[int] = None) -> tuple[float, float]:
    """L2 and H1 norms of ``f - exact`` where ``exact(x, d)`` gives derivatives."""
    sp = f.space
    q = sp.r + 4 if q is None else q
    tab = cell_tables(sp, q)
    e0 = quad_values(f, 0, q) - exact(tab.x, 0)
    e1 = quad_values(f, 1, q) - exact(tab.x, 1)
    l2sq = float(np.sum(e0 * e0 * tab.w[None, :]))
    semi = float(np.sum(e1 * e1 * tab.w[None, :]))
    return np.sqrt(l2sq), np.sqrt(l2sq + semi)


@dataclass
class ConvergenceReport:
    """Per-level errors for one or more quantities and their fitted slopes.

    ``expected`` maps a quantity name to the minimum acceptable slope;
    quantities without an entry are reported but not judged.
    """

    Ns: list
    errors: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)
    degenerate_tol: float = 1e-11

    def __post_init__(self):
        self.slopes: dict = {}
        self.residuals: dict = {}

    @property
    def hs(self) -> np.ndarray:
        return 1.0 / np.asarray(self.Ns, dtype=float)

    def add(self, name: str, values) -> None:
        self.errors[name] = np.asarray(values, dtype=float)

    @property
    def degenerate(self) -> bool:
        return all(np.all(np.abs(v) <= self.degenerate_tol) for v in self.errors.values())

    def fit(self) -> "ConvergenceReport":
        self.slopes, self.residuals = {}, {}
        if self.degenerate or len(self.Ns) < 3:
            return self
        for name, v in self.errors.items():
            try:
                self.slopes[name], self.residuals[name] = fit_rate(self.hs, v)
            except ValueError:
                self.slopes[name] = self.residuals[name] = float("nan")
        return self

    @property
    def status(self) -> str:
        if self.degenerate:
            return "degenerate"
        if len(self.Ns) < 3:
            return "insufficient-levels"
        ok = True
        for name, lo in self.expected.items():
            s = self.slopes.get(name, float("nan"))
            ok &= bool(s >= lo)
            if name in self.upper:
                ok &= bool(s <= self.upper[name])
        return "pass" if ok else "fail"
