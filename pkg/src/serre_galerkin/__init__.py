"""Periodic smooth-spline Galerkin solver for the Serre equations."""

from .assembly import (
    BandedCyclicMatrix,
    CyclicFactorization,
    SingularMatrixError,
    bilinear_form,
    f_h,
    grad_load,
    l2_project,
    load,
    mass_matrix,
    solve_banded_cyclic,
    weighted_grad_form,
    weighted_mass,
)
from .manufactured import ManufacturedProblem, SelfCheckError
from .picard import PicardReport, Trajectory, consistency_residual, iterate_error, run_picard
from .quasiinterp import QIMask, derive_mask, probe_product, probe_superconvergence, quasi_interpolate
from .serre import PositivityViolation, SolverConfig, State, rhs, simulate
from .splines import SplineFn, SplineSpace, build_space, eval_spline, norms

__version__ = "0.1.0"
