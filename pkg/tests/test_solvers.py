import numpy as np
import pytest

from fracttm.assembly import TensorMesh2D, assemble_operators, weighted_mass_stencil
from fracttm.solvers import SolverConfig, SystemSolver


@pytest.fixture(scope="module")
def ops():
    return assemble_operators(TensorMesh2D.unit_square(12, 10), 1.5, 0.1)


def test_dense_and_pcg_agree(ops):
    rng = np.random.default_rng(0)
    rhs = rng.normal(size=ops.mesh.n_dofs)
    u = rng.uniform(-1, 1, ops.mesh.n_dofs)
    S = weighted_mass_stencil(ops.mesh, 3 * u * u - 1)
    dense = SystemSolver(ops, SolverConfig(strategy="dense"))
    pcg = SystemSolver(ops, SolverConfig(strategy="pcg"))
    for a, b, c in ((400.0, 1.0, 1.0), (20.0, 0.5, 0.5), (1.0, 1.0, 0.0)):
        x1 = dense.solve(a, b, rhs, c, S)
        x2 = pcg.solve(a, b, rhs, c, S)
        assert np.allclose(x1, x2, rtol=1e-9, atol=1e-12)
        assert np.allclose(dense.matvec(a, b, c, S, x1), rhs, atol=1e-10)


def test_auto_strategy_threshold(ops):
    assert SystemSolver(ops).strategy == "dense"
    assert SystemSolver(ops, SolverConfig(dense_max_dofs=10)).strategy == "pcg"
    with pytest.raises(ValueError):
        SystemSolver(ops, SolverConfig(strategy="lu"))


def test_base_matrix_cached(ops):
    s = SystemSolver(ops)
    assert s.base_matrix(2.0, 1.0) is s.base_matrix(2.0, 1.0)
