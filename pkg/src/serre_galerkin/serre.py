"""Galerkin semidiscretization of the periodic Serre system and its RK4 driver.

Unknowns are the B-spline coefficients of the depth ``eta_h`` and velocity
``u_h``. Per evaluation::

    M eta_t = -((eta u)_x, B_i) + (f, B_i)
    A(eta) u_t = -(eta eta_x + eta u u_x, B_i)
                 - 1/3 (eta^3 (u u_xx - u_x^2), B_i') + (g, B_i)

with ``A(eta) = (eta B_j, B_i) + 1/3 (eta^3 B_j', B_i')``. The forcing pair
``(f, g)`` is zero for the physical problem and serves manufactured
solutions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .assembly import (
    BandedCyclicMatrix,
    CyclicFactorization,
    cell_tables,
    grad_load,
    load,
    mass_factor,
    quad_values,
    weighted_grad_form,
    weighted_mass,
)
from .quasiinterp import QIMask, quasi_interpolate
from .splines import SplineFn, SplineSpace, eval_spline

logger = logging.getLogger(__name__)

__all__ = [
    "State",
    "SolverConfig",
    "EnergyDiag",
    "PositivityViolation",
    "SimulationResult",
    "assemble_A",
    "rhs",
    "rk4_step",
    "simulate",
    "energy",
    "mass",
    "min_depth",
]


class PositivityViolation(RuntimeError):
    """Depth fell below the monitored floor."""

    def __init__(self, t: float, x: float, value: float, floor: float):
        super().__init__(f"depth {value:.6g} below floor {floor:.6g} at x={x:.6g}, t={t:.6g}")
        self.t, self.x, self.value, self.floor = t, x, value, floor

    def report(self) -> dict:
        return {"t": self.t, "x": self.x, "value": self.value, "floor": self.floor}


@dataclass(frozen=True)
class State:
    eta: SplineFn
    u: SplineFn
    t: float = 0.0

    def __post_init__(self):
        if self.eta.space != self.u.space:
            raise ValueError("eta and u must share one spline space")

    @property
    def space(self) -> SplineSpace:
        return self.eta.space


@dataclass(frozen=True)
class SolverConfig:
    c0: float = 1.0
    depth_floor: Optional[float] = None
    dt: float = 1e-3
    t_end: float = 0.0
    q: Optional[int] = None
    forcing: Optional[tuple] = None  # (f(x, t), g(x, t))

    def __post_init__(self):
        if self.depth_floor is None:
            object.__setattr__(self, "depth_floor", self.c0 / 8.0)
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not self.depth_floor > 0:
            raise ValueError(f"depth floor must be positive, got {self.depth_floor}")


@dataclass(frozen=True)
class EnergyDiag:
    value: float
    t: float


@dataclass
class SimulationResult:
    space: SplineSpace
    states: list
    times: np.ndarray
    min_depth: np.ndarray
    energy: np.ndarray
    mass: np.ndarray
    violation: Optional[dict] = None

    @property
    def final(self) -> State:
        return self.states[-1]


def _monitor_points(space: SplineSpace, q: Optional[int]) -> np.ndarray:
    tab = cell_tables(space, q)
    return np.concatenate([space.knots, tab.x.ravel()])


def min_depth(eta: SplineFn, q: Optional[int] = None) -> tuple[float, float]:
    """Minimum of ``eta`` over knots and quadrature points, with its location."""
    xs = _monitor_points(eta.space, q)
    vals = eval_spline(eta, xs)
    k = int(np.argmin(vals))
    return float(vals[k]), float(xs[k])


def check_depth(eta: SplineFn, floor: float, t: float, q: Optional[int] = None) -> float:
    m, x = min_depth(eta, q)
    if not m >= floor:
        raise PositivityViolation(t, x, m, floor)
    return m


def assemble_A(eta: SplineFn | np.ndarray, q: Optional[int] = None,
               space: Optional[SplineSpace] = None) -> BandedCyclicMatrix:
    """``(eta B_j, B_i) + 1/3 (eta^3 B_j', B_i')``; ``eta`` must be positive."""
    if isinstance(eta, SplineFn):
        space = eta.space
        ev = quad_values(eta, 0, q)
    else:
        ev = np.asarray(eta, dtype=float)
    if not np.all(ev > 0):
        i = np.unravel_index(int(np.argmin(ev)), ev.shape)
        x = float(cell_tables(space, q).x[i])
        raise PositivityViolation(float("nan"), x, float(ev[i]), 0.0)
    return weighted_mass(space, ev, q) + weighted_grad_form(space, ev**3, q)


def _forcing_loads(space, cfg: SolverConfig, t: float):
    if cfg.forcing is None:
        return 0.0, 0.0
    f, g = cfg.forcing
    x = cell_tables(space, cfg.q).x
    return load(space, f(x, t), cfg.q), load(space, g(x, t), cfg.q)


def rhs(state: State, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient time derivatives ``(eta_dot, u_dot)`` of the semidiscrete system."""
    sp, q = state.space, cfg.q
    check_depth(state.eta, cfg.depth_floor, state.t, q)
    e, ex = quad_values(state.eta, 0, q), quad_values(state.eta, 1, q)
    u, ux, uxx = (quad_values(state.u, d, q) for d in range(3))
    fl, gl = _forcing_loads(sp, cfg, state.t)

    eta_dot = mass_factor(sp).solve(-load(sp, ex * u + e * ux, q) + fl)
    e3 = e**3
    b = -load(sp, e * ex + e * u * ux, q) - grad_load(sp, e3 * (u * uxx - ux * ux), q) + gl
    A = weighted_mass(sp, e, q) + weighted_grad_form(sp, e3, q)
    u_dot = CyclicFactorization(A).solve(b)
    return eta_dot, u_dot


def _axpy(state: State, k, a: float) -> State:
    sp = state.space
    return State(SplineFn(sp, state.eta.coeffs + a * k[0]), SplineFn(sp, state.u.coeffs + a * k[1]),
                 state.t + a)


def rk4_step(state: State, cfg: SolverConfig, dt: float) -> State:
    """One classical Runge-Kutta step; stage positivity violations propagate."""
    k1 = rhs(state, cfg)
    k2 = rhs(_axpy(state, k1, dt / 2), cfg)
    k3 = rhs(_axpy(state, k2, dt / 2), cfg)
    k4 = rhs(_axpy(state, k3, dt), cfg)
    de = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
    du = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
    sp = state.space
    return State(SplineFn(sp, state.eta.coeffs + dt * de), SplineFn(sp, state.u.coeffs + dt * du),
                 state.t + dt)


def energy(state: State, q: Optional[int] = None) -> EnergyDiag:
    """``||eta||^2 + (eta u, u) + 1/3 (eta^3 u_x, u_x)``."""
    tab = cell_tables(state.space, q)
    e = quad_values(state.eta, 0, q)
    u, ux = quad_values(state.u, 0, q), quad_values(state.u, 1, q)
    val = np.sum((e * e + e * u * u + e**3 * ux * ux / 3.0) * tab.w[None, :])
    return EnergyDiag(float(val), state.t)


def mass(eta: SplineFn) -> float:
    """``integral of eta`` over one period (each basis function integrates to ``h``)."""
    return float(eta.space.h * np.sum(eta.coeffs))


def n_steps_for(t_end: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil(t_end / dt - 1e-9))
    return n, t_end / n


def initial_state(space: SplineSpace, eta0: Callable, u0: Callable,
                  mask: Optional[QIMask] = None) -> State:
    return State(quasi_interpolate(space, eta0, mask), quasi_interpolate(space, u0, mask), 0.0)


def simulate(space: SplineSpace, init, cfg: SolverConfig, mask: Optional[QIMask] = None,
             keep_states: bool = False) -> SimulationResult:
    """Integrate from ``(Q_h eta0, Q_h u0)`` to ``cfg.t_end``.

    Stops early, without raising, if the depth drops below ``cfg.depth_floor``;
    the violation is recorded on the result.
    """
    if space.r < 3:
        raise ValueError("time integration needs r >= 3 (u_hxx must exist)")
    eta0, u0 = init
    state = initial_state(space, eta0, u0, mask)
    n, dt = n_steps_for(cfg.t_end, cfg.dt)
    states = [state]
    times, mins, ens, masses = [0.0], [min_depth(state.eta, cfg.q)[0]], [energy(state, cfg.q).value], [mass(state.eta)]
    violation = None
    for k in range(n):
        try:
            new = rk4_step(state, cfg, dt)
            new = replace(new, t=(k + 1) * dt)
            check_depth(new.eta, cfg.depth_floor, new.t, cfg.q)
        except PositivityViolation as exc:
            violation = exc.report()
            logger.warning("simulation stopped: %s", exc)
            break
        state = new
        if keep_states:
            states.append(state)
        else:
            states = [states[0], state]
        times.append(state.t)
        mins.append(min_depth(state.eta, cfg.q)[0])
        ens.append(energy(state, cfg.q).value)
        masses.append(mass(state.eta))
    return SimulationResult(space, states, np.array(times), np.array(mins), np.array(ens),
                            np.array(masses), violation)
