"""Closed-form travelling-wave pair used to verify the solver.

``eta* = 1 + a sin(2 pi (x - t))`` and ``u* = b sin(2 pi (x + t))``, with the
forcings that make them solve

    eta_t + (eta u)_x = f
    eta u_t - 1/3 (eta^3 u_tx)_x + eta eta_x + eta u u_x
        - 1/3 [eta^3 (u u_xx - u_x^2)]_x = g
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ManufacturedProblem", "SelfCheckError"]

TWO_PI = 2.0 * np.pi


class SelfCheckError(RuntimeError):
    pass


@dataclass(frozen=True)
class ManufacturedProblem:
    a: float = 0.1
    b: float = 0.1

    def __post_init__(self):
        if not 0 <= self.a < 0.5:
            raise ValueError(f"amplitude a must lie in [0, 0.5), got {self.a}")
        if self.b < 0:
            raise ValueError(f"amplitude b must be non-negative, got {self.b}")

    @property
    def c0(self) -> float:
        return 1.0 - self.a

    @property
    def steady(self) -> bool:
        return self.a == 0 and self.b == 0

    # d^m/dx^m d^n/dt^n sin(k(x -+ t)) = k^(m+n) (-+1)^n sin(theta + (m+n) pi/2)
    def eta(self, x, t, dx: int = 0, dt: int = 0):
        x = np.asarray(x, dtype=float)
        p = dx + dt
        val = self.a * TWO_PI**p * (-1) ** dt * np.sin(TWO_PI * (x - t) + p * np.pi / 2)
        return val + 1.0 if p == 0 else val

    def u(self, x, t, dx: int = 0, dt: int = 0):
        x = np.asarray(x, dtype=float)
        p = dx + dt
        return self.b * TWO_PI**p * np.sin(TWO_PI * (x + t) + p * np.pi / 2)

    def forcing_f(self, x, t):
        e, ex, et = self.eta(x, t), self.eta(x, t, 1), self.eta(x, t, 0, 1)
        u, ux = self.u(x, t), self.u(x, t, 1)
        return et + ex * u + e * ux

    def forcing_g(self, x, t):
        e, ex = self.eta(x, t), self.eta(x, t, 1)
        u, ux, uxx, uxxx = (self.u(x, t, d) for d in range(4))
        ut, utx, utxx = self.u(x, t, 0, 1), self.u(x, t, 1, 1), self.u(x, t, 2, 1)
        e2, e3 = e * e, e**3
        return (
            e * ut
            - e2 * ex * utx
            - e3 * utxx / 3.0
            + e * ex
            + e * u * ux
            - e2 * ex * (u * uxx - ux * ux)
            - e3 * (u * uxxx - ux * uxx) / 3.0
        )

    @property
    def forcing(self):
        return (self.forcing_f, self.forcing_g)

    def initial(self):
        return (lambda x: self.eta(x, 0.0), lambda x: self.u(x, 0.0))

    def fd_residuals(self, x, t, step: float = 1e-5):
        """Forced residuals with every outer derivative replaced by a central
        difference of the closed-form inner expression."""

        def ddx(fn):
            return (fn(x + step, t) - fn(x - step, t)) / (2 * step)

        def ddt(fn):
            return (fn(x, t + step) - fn(x, t - step)) / (2 * step)

        e = self.eta(x, t)
        u = self.u(x, t)
        r1 = ddt(self.eta) + ddx(lambda xx, tt: self.eta(xx, tt) * self.u(xx, tt)) - self.forcing_f(x, t)
        disp = ddx(lambda xx, tt: self.eta(xx, tt) ** 3 * self.u(xx, tt, 1, 1))
        nl = ddx(lambda xx, tt: self.eta(xx, tt) ** 3
                 * (self.u(xx, tt) * self.u(xx, tt, 2) - self.u(xx, tt, 1) ** 2))
        r2 = (e * ddt(self.u) - disp / 3.0 + e * ddx(self.eta) + e * u * ddx(self.u) - nl / 3.0
              - self.forcing_g(x, t))
        return r1, r2

    def self_check(self, n: int = 1000, seed: int = 0, rtol: float = 1e-6, atol: float = 1e-9):
        """Check closed-form derivatives against central differences and the
        forced residuals; raise :class:`SelfCheckError` on failure."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 1, n)
        t = rng.uniform(0, 1, n)
        h = 1e-5
        checks = []
        for name, fn in (("eta", self.eta), ("u", self.u)):
            for ddx, ddt in ((1, 0), (0, 1), (2, 0), (1, 1), (3, 0), (2, 1)):
                exact = fn(x, t, ddx, ddt)
                lower = (ddx - 1, ddt) if ddx else (ddx, ddt - 1)
                if ddx:
                    fd = (fn(x + h, t, *lower) - fn(x - h, t, *lower)) / (2 * h)
                else:
                    fd = (fn(x, t + h, *lower) - fn(x, t - h, *lower)) / (2 * h)
                scale = max(1.0, float(np.max(np.abs(exact))))
                err = float(np.max(np.abs(fd - exact))) / scale
                checks.append((f"{name}_x{ddx}t{ddt}", err, rtol))
        for name, fn in (("eta", self.eta), ("u", self.u)):
            err = float(np.max(np.abs(fn(x + 1.0, t) - fn(x, t))))
            checks.append((f"{name}_periodic", err, 1e-12))
        r1, r2 = self.exact_residuals(x, t)
        checks.append(("residual_mass", float(np.max(np.abs(r1))), atol))
        checks.append(("residual_momentum", float(np.max(np.abs(r2))), atol))
        f1, f2 = self.fd_residuals(x, t, h)
        scale = max(1.0, float(np.max(np.abs(self.forcing_g(x, t)))))
        checks.append(("fd_residual_mass", float(np.max(np.abs(f1))) / scale, rtol))
        checks.append(("fd_residual_momentum", float(np.max(np.abs(f2))) / scale, rtol))
        bad = [c for c in checks if not c[1] <= c[2]]
        if bad:
            raise SelfCheckError("manufactured problem self-check failed: " +
                                 ", ".join(f"{n}={e:.2e} (tol {tl:.0e})" for n, e, tl in bad))
        return checks

    def exact_residuals(self, x, t):
        """Residuals of the forced system built from the closed-form derivatives
        by an independent product-rule expansion (divergence form)."""
        e = self.eta(x, t)
        ex, et = self.eta(x, t, 1), self.eta(x, t, 0, 1)
        u, ux, uxx, uxxx = (self.u(x, t, d) for d in range(4))
        ut, utx, utxx = self.u(x, t, 0, 1), self.u(x, t, 1, 1), self.u(x, t, 2, 1)
        r1 = et + (ex * u + e * ux) - self.forcing_f(x, t)
        # (eta^3 w)_x = 3 eta^2 eta_x w + eta^3 w_x
        d_disp = 3 * e**2 * ex * utx + e**3 * utxx
        w = u * uxx - ux * ux
        wx = u * uxxx - ux * uxx
        d_nl = 3 * e**2 * ex * w + e**3 * wx
        r2 = e * ut - d_disp / 3.0 + e * ex + e * u * ux - d_nl / 3.0 - self.forcing_g(x, t)
        return r1, r2
