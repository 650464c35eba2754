"""Time two-mesh propagation.

A nonlinear theta scheme runs on the coarse step ``tau_c = M tau``.  Its
states are blended linearly onto the fine grid, and each fine step solves a
single linear system in which ``f`` is linearized about the blended state.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import OperatorSet, StateVector, TensorMesh2D, assemble_operators, initial_coefficients
from .problems import ProblemSpec
from .solvers import SystemSolver
from .timestep import (
    DiscretizationConfig,
    NewtonConfig,
    SourceLoads,
    ThetaScheme,
    first_step_system,
    get_solver,
    linearized_system,
    n_steps,
    nonlinear_trajectory,
    theta_step_system,
)


@dataclass(frozen=True)
class TwoMeshGrid:
    tau_c: float
    M: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")
        if self.M > 1.0 / self.tau_c * (1.0 + 1e-12):
            raise ValueError(f"M={self.M} exceeds 1/tau_c={1.0 / self.tau_c:g}")
        n_steps(self.T, self.tau_c)

    @classmethod
    def from_fine(cls, tau: float, M: int, T: float = 1.0) -> "TwoMeshGrid":
        return cls(M * tau, M, T)

    @property
    def tau(self) -> float:
        return self.tau_c / self.M

    @property
    def N(self) -> int:
        return n_steps(self.T, self.tau_c)

    @property
    def n_fine(self) -> int:
        return self.N * self.M

    def bracket(self, m: int) -> tuple[int, float]:
        """Coarse index ``n = ceil(m / M)`` and blend weight ``lambda = n - m / M``."""
        if not 1 <= m <= self.n_fine:
            raise IndexError(f"fine index {m} outside 1..{self.n_fine}")
        n = -(-m // self.M)
        return n, (n * self.M - m) / self.M


@dataclass
class TtmTrajectory:
    coarse_states: list[StateVector]
    fine_states: list[StateVector]
    grid: TwoMeshGrid
    opset: OperatorSet
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def final(self) -> StateVector:
        return self.fine_states[-1]

    @property
    def cpu_seconds(self) -> float:
        return sum(self.timings.values())


def coarse_solve(
    problem: ProblemSpec,
    grid: TwoMeshGrid,
    opset: OperatorSet,
    scheme: ThetaScheme,
    newton: NewtonConfig | None = None,
    *,
    solver: SystemSolver | None = None,
    loads=None,
    u0=None,
    initial: str = "l2",
) -> list[StateVector]:
    """Nonlinear theta trajectory with step ``tau_c``; ``scheme.tau`` must equal it."""
    if not math.isclose(scheme.tau, grid.tau_c, rel_tol=1e-12):
        raise ValueError("coarse scheme step differs from the grid's tau_c")
    mesh = opset.mesh
    if u0 is None:
        u0 = initial_coefficients(problem.u0, mesh, initial)
    return nonlinear_trajectory(
        problem, opset, scheme, newton or NewtonConfig(), solver or get_solver(opset),
        loads or SourceLoads(problem, mesh), np.asarray(u0, dtype=float), grid.N, label="coarse step",
    )


def interpolate_to_fine(coarse_states, grid: TwoMeshGrid, m: int) -> StateVector:
    """``lambda U_C^{n-1} + (1 - lambda) U_C^n`` at fine level ``m``."""
    n, lam = grid.bracket(m)
    t = m * grid.tau
    if lam == 0.0:
        return StateVector(coarse_states[n].coeffs, t)
    u = lam * np.asarray(coarse_states[n - 1]) + (1.0 - lam) * np.asarray(coarse_states[n])
    return StateVector(u, t)


def fine_first_step_system(uF0, uI1, opset: OperatorSet, scheme: ThetaScheme, loads):
    """Stencil, coefficients and right-hand side of the first linearized fine step."""
    uF0 = np.asarray(uF0, dtype=float)
    system = first_step_system(opset, scheme, uF0, loads(0.0), loads(scheme.tau))
    S, rhs = linearized_system(opset, system, uI1)
    return system, S, rhs


def fine_step_system(uF1, uF2, uI, opset: OperatorSet, scheme: ThetaScheme, t_m: float, loads):
    system = theta_step_system(opset, scheme, uF1, uF2, loads(t_m), loads(t_m - scheme.tau))
    S, rhs = linearized_system(opset, system, uI)
    return system, S, rhs


def fine_first_step_linear(
    uF0: StateVector, uI1: StateVector, opset: OperatorSet, problem: ProblemSpec, scheme: ThetaScheme,
    *, solver: SystemSolver | None = None, loads=None,
) -> StateVector:
    loads = loads or SourceLoads(problem, opset.mesh)
    solver = solver or get_solver(opset)
    system, S, rhs = fine_first_step_system(uF0, uI1, opset, scheme, loads)
    u = solver.solve(system.a, system.b, rhs, system.c, S)
    return StateVector(u, uF0.time_label + scheme.tau)


def fine_step_linear(
    uF1: StateVector, uF2: StateVector, uI: StateVector, opset: OperatorSet, problem: ProblemSpec,
    scheme: ThetaScheme, t_m: float | None = None, *, solver: SystemSolver | None = None, loads=None,
) -> StateVector:
    """Linearized theta step from ``uF1 = U_F^{m-1}``, ``uF2 = U_F^{m-2}`` about ``uI = U_I^m``."""
    loads = loads or SourceLoads(problem, opset.mesh)
    solver = solver or get_solver(opset)
    if t_m is None:
        t_m = uF1.time_label + scheme.tau
    system, S, rhs = fine_step_system(uF1, uF2, uI, opset, scheme, t_m, loads)
    u = solver.solve(system.a, system.b, rhs, system.c, S)
    return StateVector(u, t_m)


def run_ttm(problem: ProblemSpec, disc: DiscretizationConfig, opset: OperatorSet | None = None) -> TtmTrajectory:
    """Coarse nonlinear solve, interpolation, and the fine linearized sweep; CPU seconds per phase."""
    t_start = time.process_time()
    grid = TwoMeshGrid.from_fine(disc.tau, disc.M, problem.T)
    mesh = TensorMesh2D.unit_square(disc.n_cells)
    if opset is None:
        opset = assemble_operators(mesh, problem.alpha, problem.epsilon, disc.stiffness)
    solver = SystemSolver(opset, disc.solver)
    loads = SourceLoads(problem, mesh)
    u0 = initial_coefficients(problem.u0, mesh, disc.initial)
    coarse = coarse_solve(problem, grid, opset, disc.scheme(coarse=True), disc.newton,
                          solver=solver, loads=loads, u0=u0)
    t_coarse = time.process_time()

    interp = [None] + [interpolate_to_fine(coarse, grid, m) for m in range(1, grid.n_fine + 1)]
    t_interp = time.process_time()

    scheme = disc.scheme()
    fine = [StateVector(u0, 0.0)]
    fine.append(fine_first_step_linear(fine[0], interp[1], opset, problem, scheme, solver=solver, loads=loads))
    for m in range(2, grid.n_fine + 1):
        fine.append(fine_step_linear(fine[-1], fine[-2], interp[m], opset, problem, scheme, m * grid.tau,
                                     solver=solver, loads=loads))
    t_end = time.process_time()
    timings = {"coarse": t_coarse - t_start, "interp": t_interp - t_coarse, "fine": t_end - t_interp}
    return TtmTrajectory(coarse, fine, grid, opset, timings)
