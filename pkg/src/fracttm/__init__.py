"""Finite elements and two-mesh time stepping for the 2-D space-fractional Allen-Cahn equation."""
from .assembly import (
    Mesh1D,
    OperatorSet,
    StateVector,
    TensorMesh2D,
    assemble_frac_stiffness_1d,
    assemble_load,
    assemble_mass_1d,
    assemble_operators,
    assemble_weighted_mass,
    initial_coefficients,
    l2_project,
    nodal_interpolate,
)
from .fraccalc import FracOrder, numeric_rl_oracle, rl_deriv_hat, rl_left_deriv_monomial, rl_right_deriv_monomial
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import (
    ReferenceSolution,
    convergence_rate,
    energy_H,
    error_frac_norm,
    error_l2,
    seminorm_mu,
)
from .problems import PROBLEMS, ProblemSpec, get_problem
from .timestep import DiscretizationConfig, NewtonConfig, NewtonDivergence, ThetaScheme, run_standard_fe
from .ttm import TwoMeshGrid, run_ttm

__version__ = "0.1.0"

__all__ = [
    "Mesh1D", "TensorMesh2D", "OperatorSet", "StateVector", "assemble_mass_1d", "assemble_frac_stiffness_1d",
    "assemble_operators", "assemble_weighted_mass", "assemble_load", "nodal_interpolate", "l2_project",
    "initial_coefficients", "FracOrder", "numeric_rl_oracle", "rl_deriv_hat", "rl_left_deriv_monomial",
    "rl_right_deriv_monomial", "KERNEL_BACKEND", "ReferenceSolution", "convergence_rate", "energy_H",
    "error_frac_norm", "error_l2", "seminorm_mu", "PROBLEMS", "ProblemSpec", "get_problem",
    "DiscretizationConfig", "NewtonConfig", "NewtonDivergence", "ThetaScheme", "run_standard_fe",
    "TwoMeshGrid", "run_ttm", "__version__",
]
