"""Picard iteration for the semidiscrete Serre system.

Iterate ``n + 1`` solves the linear nonautonomous system obtained by freezing
``eta_h^n`` and ``u_h^n`` in the coefficients:

    eta_t + P_h(eta^n u_x + u^n eta_x) = P_h f
    A(eta^n) u_t = -P_h(eta^n eta_x + eta^n u^n u_x)
                   - F_h((eta^n)^3 (u^n u_xx - u^n_x u_x)) + P_h g

Every iterate starts from the same initial splines and lives on the same
uniform time grid. Frozen coefficients at RK stage times come from cubic
Lagrange interpolation through the four nearest grid nodes of the previous
iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .assembly import (
    CyclicFactorization,
    bilinear_form,
    cell_tables,
    grad_load,
    load,
    mass_factor,
    mass_matrix,
    quad_values,
    weighted_grad_form,
    weighted_mass,
)
from .quasiinterp import QIMask, apply, default_mask
from .serre import PositivityViolation, SolverConfig, State, initial_state, n_steps_for
from .splines import SplineFn, SplineSpace

logger = logging.getLogger(__name__)

__all__ = [
    "Trajectory",
    "PicardReport",
    "constant_trajectory",
    "picard_iterate",
    "run_picard",
    "iterate_error",
    "IterateError",
    "consistency_residual",
    "l2_h1_norms",
]

DELTA_STOP = 1e-12
SOLVER_TOL = 1e-13


@dataclass
class Trajectory:
    """Coefficient records of one iterate on a uniform time grid."""

    space: SplineSpace
    times: np.ndarray
    eta: np.ndarray  # (K+1, N)
    u: np.ndarray
    eta_t: np.ndarray
    u_t: np.ndarray

    def __post_init__(self):
        if len(self.times) < 5:
            raise ValueError(f"time grid needs at least 5 nodes, got {len(self.times)}")

    @property
    def K(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, k: int) -> State:
        return State(SplineFn(self.space, self.eta[k]), SplineFn(self.space, self.u[k]), float(self.times[k]))

    def frozen(self, k: int, frac: float) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients at ``t_k + frac * dt`` by cubic interpolation."""
        j0 = min(max(k - 1, 0), self.K - 3)
        s = k - j0 + frac
        w = _lagrange4(s)
        return w @ self.eta[j0 : j0 + 4], w @ self.u[j0 : j0 + 4]

    def min_depth(self, q: Optional[int] = None) -> float:
        return float(np.min(quad_values(self.eta, 0, q, space=self.space)))


def _lagrange4(s: float) -> np.ndarray:
    nodes = (0.0, 1.0, 2.0, 3.0)
    w = np.ones(4)
    for a in range(4):
        for b in range(4):
            if a != b:
                w[a] *= (s - nodes[b]) / (nodes[a] - nodes[b])
    return w


def constant_trajectory(init: State, times: np.ndarray) -> Trajectory:
    K1 = len(times)
    z = np.zeros((K1, init.space.N))
    return Trajectory(init.space, np.asarray(times, dtype=float), np.tile(init.eta.coeffs, (K1, 1)),
                      np.tile(init.u.coeffs, (K1, 1)), z, z.copy())


@dataclass
class _Frozen:
    """Quadrature-point data of the frozen coefficients at one stage time."""

    E: np.ndarray
    U: np.ndarray
    Ux: np.ndarray
    factor: CyclicFactorization
    f: object
    g: object


def _freeze(prev: Trajectory, k: int, frac: float, cfg: SolverConfig) -> _Frozen:
    sp, q = prev.space, cfg.q
    ec, uc = prev.frozen(k, frac)
    E = quad_values(ec, 0, q, space=sp)
    t = float(prev.times[0] + (k + frac) * prev.dt)
    m = float(E.min())
    if not m >= cfg.depth_floor:
        i = np.unravel_index(int(np.argmin(E)), E.shape)
        raise PositivityViolation(t, float(cell_tables(sp, q).x[i]), m, cfg.depth_floor)
    A = weighted_mass(sp, E, q) + weighted_grad_form(sp, E**3, q)
    fl = gl = 0.0
    if cfg.forcing is not None:
        x = cell_tables(sp, q).x
        fl, gl = load(sp, cfg.forcing[0](x, t), q), load(sp, cfg.forcing[1](x, t), q)
    return _Frozen(E, quad_values(uc, 0, q, space=sp), quad_values(uc, 1, q, space=sp),
                   CyclicFactorization(A), fl, gl)


def _linear_rhs(fz: _Frozen, eta: np.ndarray, u: np.ndarray, sp: SplineSpace, q) -> tuple:
    ex = quad_values(eta, 1, q, space=sp)
    ux = quad_values(u, 1, q, space=sp)
    uxx = quad_values(u, 2, q, space=sp)
    E, U, Ux = fz.E, fz.U, fz.Ux
    eta_dot = mass_factor(sp).solve(-load(sp, E * ux + U * ex, q) + fz.f)
    b = (-load(sp, E * ex + E * U * ux, q) - grad_load(sp, E**3 * (U * uxx - Ux * ux), q) + fz.g)
    return eta_dot, fz.factor.solve(b)


def picard_iterate(prev: Trajectory, init: State, cfg: SolverConfig) -> Trajectory:
    """Integrate the linear system with coefficients frozen from ``prev``."""
    sp, q = prev.space, cfg.q
    if sp.r < 3:
        raise ValueError("Picard iteration needs r >= 3")
    K, dt = prev.K, prev.dt
    eta = np.empty((K + 1, sp.N))
    u = np.empty_like(eta)
    eta_t = np.empty_like(eta)
    u_t = np.empty_like(eta)
    eta[0], u[0] = init.eta.coeffs, init.u.coeffs
    node = _freeze(prev, 0, 0.0, cfg)
    for k in range(K):
        mid = _freeze(prev, k, 0.5, cfg)
        nxt = _freeze(prev, k, 1.0, cfg)
        e0, u0 = eta[k], u[k]
        k1 = _linear_rhs(node, e0, u0, sp, q)
        eta_t[k], u_t[k] = k1
        k2 = _linear_rhs(mid, e0 + 0.5 * dt * k1[0], u0 + 0.5 * dt * k1[1], sp, q)
        k3 = _linear_rhs(mid, e0 + 0.5 * dt * k2[0], u0 + 0.5 * dt * k2[1], sp, q)
        k4 = _linear_rhs(nxt, e0 + dt * k3[0], u0 + dt * k3[1], sp, q)
        eta[k + 1] = e0 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        u[k + 1] = u0 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        node = nxt
    eta_t[K], u_t[K] = _linear_rhs(node, eta[K], u[K], sp, q)
    return Trajectory(sp, prev.times.copy(), eta, u, eta_t, u_t)


def l2_h1_norms(space: SplineSpace, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise L2 and H1 norms of coefficient arrays ``(..., N)``."""
    c = np.atleast_2d(coeffs).T
    M = mass_matrix(space)
    S = _stiffness(space)
    l2sq = np.sum(c * (M @ c), axis=0)
    semi = np.sum(c * (S @ c), axis=0)
    l2sq = np.maximum(l2sq, 0.0)
    return np.sqrt(l2sq), np.sqrt(l2sq + np.maximum(semi, 0.0))


def _stiffness(space: SplineSpace):
    return bilinear_form(space, 1.0, 1, 1, q=space.r)


@dataclass
class PicardReport:
    """Convergence diagnostics; entry ``n`` compares iterates ``n + 1`` and ``n``."""

    deltas: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    min_depths: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    status: str = "ok"
    violation: Optional[dict] = None
    times: Optional[np.ndarray] = None

    def rows(self):
        for n, (d, a, m) in enumerate(zip(self.deltas, self.alphas, self.min_depths)):
            yield n, d, a, m


def sup_delta(a: Trajectory, b: Trajectory) -> float:
    """``max_t (||eta_a - eta_b||^2 + ||u_a - u_b||_1^2)^(1/2)`` over the grid."""
    de, _ = l2_h1_norms(a.space, a.eta - b.eta)
    _, du = l2_h1_norms(a.space, a.u - b.u)
    return float(np.max(np.sqrt(de**2 + du**2)))


def run_picard(space: SplineSpace, init, n_iters: int, cfg: SolverConfig,
               mask: Optional[QIMask] = None, reference=None) -> tuple[PicardReport, Trajectory]:
    """Run the iteration from the time-constant extension of the initial data.

    ``init`` is a pair of callables ``(eta0, u0)`` (quasiinterpolated) or a
    :class:`State`. With ``reference`` (an object with ``eta(x, t, dx, dt)``
    and ``u(...)``) the iterate errors are recorded as well.
    """
    if n_iters < 2:
        raise ValueError("need at least 2 Picard iterations")
    mask = default_mask(space.r) if mask is None else mask
    s0 = init if isinstance(init, State) else initial_state(space, *init, mask)
    K, dt = n_steps_for(cfg.t_end, cfg.dt)
    if K < 4:
        K, dt = 4, cfg.t_end / 4
    times = np.arange(K + 1) * dt
    prev = constant_trajectory(s0, times)
    report = PicardReport(times=times)
    streak = 0
    for n in range(n_iters):
        try:
            new = picard_iterate(prev, s0, cfg)
        except PositivityViolation as exc:
            report.status = "positivity-violation"
            report.violation = exc.report()
            logger.warning("Picard iterate %d stopped: %s", n + 1, exc)
            break
        d = sup_delta(new, prev)
        report.deltas.append(d)
        report.min_depths.append(new.min_depth(cfg.q))
        alpha = None
        if n >= 1 and report.deltas[n - 1] > 10 * SOLVER_TOL:
            alpha = d / report.deltas[n - 1]
        report.alphas.append(alpha)
        if reference is not None:
            err = iterate_error(new, reference, mask)
            report.theta.append(err.theta)
            report.xi.append(err.xi)
        streak = streak + 1 if (alpha is not None and alpha >= 1) else 0
        if streak >= 2:
            report.status = "no-contraction"
        prev = new
        if d < DELTA_STOP:
            break
    return report, prev


class IterateError(NamedTuple):
    theta: float
    xi: float
    theta_t: float
    xi_t: float


def iterate_error(traj: Trajectory, reference, mask: Optional[QIMask] = None) -> IterateError:
    """Sup-over-grid norms of ``Q_h eta - eta_h`` (L2) and ``Q_h u - u_h`` (H1),
    plus the same for the time derivatives."""
    sp = traj.space
    mask = default_mask(sp.r) if mask is None else mask
    x = sp.knots
    th, xi, th_t, xi_t = [], [], [], []
    for k, t in enumerate(traj.times):
        qe = apply(sp, mask, reference.eta(x, t)).coeffs
        qu = apply(sp, mask, reference.u(x, t)).coeffs
        qet = apply(sp, mask, reference.eta(x, t, 0, 1)).coeffs
        qut = apply(sp, mask, reference.u(x, t, 0, 1)).coeffs
        th.append(qe - traj.eta[k])
        xi.append(qu - traj.u[k])
        th_t.append(qet - traj.eta_t[k])
        xi_t.append(qut - traj.u_t[k])
    theta, _ = l2_h1_norms(sp, np.array(th))
    _, xi_n = l2_h1_norms(sp, np.array(xi))
    theta_t, _ = l2_h1_norms(sp, np.array(th_t))
    _, xi_tn = l2_h1_norms(sp, np.array(xi_t))
    return IterateError(float(theta.max()), float(xi_n.max()), float(theta_t.max()), float(xi_tn.max()))


def consistency_residual(space: SplineSpace, mask: Optional[QIMask], exact, t: float,
                         forcing=None, q: Optional[int] = None) -> tuple[float, float]:
    """L2 norms of the defects left by quasiinterpolated exact fields.

    With ``H = Q_h eta``, ``U = Q_h u`` (both iterate indices equal)::

        psi   = H_t + P_h(H U_x + U H_x) - P_h f
        delta = P_h(H U_t) + F_h(H^3 U_tx) + P_h(H H_x + H U U_x)
                + F_h(H^3 (U U_xx - U_x U_x)) - P_h g
    """
    mask = default_mask(space.r) if mask is None else mask
    x = space.knots
    H = apply(space, mask, exact.eta(x, t))
    U = apply(space, mask, exact.u(x, t))
    Ht = apply(space, mask, exact.eta(x, t, 0, 1))
    Ut = apply(space, mask, exact.u(x, t, 0, 1))
    h, hx = quad_values(H, 0, q), quad_values(H, 1, q)
    u, ux, uxx = (quad_values(U, d, q) for d in range(3))
    ut, utx = quad_values(Ut, 0, q), quad_values(Ut, 1, q)
    fl = gl = 0.0
    if forcing is not None:
        xq = cell_tables(space, q).x
        fl, gl = load(space, forcing[0](xq, t), q), load(space, forcing[1](xq, t), q)
    mf = mass_factor(space)
    psi = Ht.coeffs + mf.solve(load(space, h * ux + u * hx, q) - fl)
    h3 = h**3
    rhs = (load(space, h * ut + h * hx + h * u * ux, q) - gl
           + grad_load(space, h3 * utx + h3 * (u * uxx - ux * ux), q))
    delta = mf.solve(rhs)
    n_psi, _ = l2_h1_norms(space, psi)
    n_delta, _ = l2_h1_norms(space, delta)
    return float(n_psi[0]), float(n_delta[0])
