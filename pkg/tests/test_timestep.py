import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracttm.assembly import StateVector, TensorMesh2D, assemble_operators, initial_coefficients
from fracttm.metrics import energy_H, error_l2
from fracttm.problems import ProblemSpec, example1_spec, example2_spec
from fracttm.fraccalc import FracOrder
from fracttm.timestep import (
    DiscretizationConfig,
    NewtonConfig,
    NewtonDivergence,
    SourceLoads,
    ThetaScheme,
    first_step_nonlinear,
    first_step_system,
    get_solver,
    n_steps,
    newton_solve,
    run_standard_fe,
    step_nonlinear,
    system_residual,
    theta_blend,
    theta_step_system,
    theta_weights,
)


@pytest.fixture(scope="module")
def ops10():
    return assemble_operators(TensorMesh2D.unit_square(10), 1.5, 0.01)


def zero_problem():
    zero = lambda x, y, t=None: np.zeros(np.broadcast(x, y).shape)  # noqa: E731
    return ProblemSpec("zero", FracOrder(1.5), 0.1, zero, zero, source_is_zero=True)


def test_theta_weights_examples():
    assert theta_weights(ThetaScheme(0.0, 1.0)) == pytest.approx((1.5, -2.0, 0.5))
    assert theta_weights(ThetaScheme(0.5, 0.1)) == pytest.approx((10.0, -10.0, 0.0))


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0, 0.5), tau=st.floats(1e-3, 1.0))
def test_theta_weights_annihilate_constants_and_differentiate_lines(theta, tau):
    c0, c1, c2 = theta_weights(ThetaScheme(theta, tau))
    assert abs(c0 + c1 + c2) < 1e-9 / tau
    # applied to t: exact derivative at the blended time (1 - theta) t_n + theta t_{n-1}
    assert (c0 * 2 * tau + c1 * tau) == pytest.approx(1.0, rel=1e-12)


def test_theta_blend_examples():
    v = np.array([1.0, 2.0])
    w = np.array([5.0, -1.0])
    assert np.array_equal(theta_blend(ThetaScheme(0.0, 0.1), v, w), v)
    assert np.allclose(theta_blend(ThetaScheme(0.5, 0.1), np.full(3, 2.0), np.zeros(3)), 1.0)
    for th in (0.0, 0.2, 0.5):
        assert np.allclose(theta_blend(ThetaScheme(th, 0.1), w, w), w)
    with pytest.raises(ValueError):
        theta_blend(ThetaScheme(0.1, 0.1), v, np.zeros(3))


def test_config_validation():
    with pytest.raises(ValueError):
        ThetaScheme(0.6, 0.1)
    with pytest.raises(ValueError):
        ThetaScheme(0.2, 0.0)
    with pytest.raises(ValueError):
        NewtonConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iters=0)
    with pytest.raises(ValueError):
        NewtonConfig(stopping="never")
    assert n_steps(1.0, 0.05) == 20
    with pytest.raises(ValueError):
        n_steps(1.0, 0.3)


def test_zero_is_a_fixed_point(ops10):
    p = zero_problem()
    scheme = ThetaScheme(0.2, 0.1)
    z = StateVector(np.zeros(ops10.mesh.n_dofs), 0.0)
    u1 = first_step_nonlinear(z, ops10, p, scheme)
    assert np.all(np.asarray(u1) == 0)
    u2 = step_nonlinear(u1, z, ops10, p, scheme)
    assert np.all(np.asarray(u2) == 0)
    assert u2.time_label == pytest.approx(0.2)
    traj = run_standard_fe(p, DiscretizationConfig(6, 0.25, 0.3))
    assert all(np.all(np.asarray(s) == 0) for s in traj.states)


def test_first_step_residual_below_tolerance(ops10):
    p = example1_spec(1.5, 0.01)
    mesh = ops10.mesh
    s0 = StateVector(initial_coefficients(p.u0, mesh), 0.0)
    scheme = ThetaScheme(0.0, 1.0 / 200.0)
    loads = SourceLoads(p, mesh)
    s1 = first_step_nonlinear(s0, ops10, p, scheme, loads=loads)
    system = first_step_system(ops10, scheme, np.asarray(s0), loads(0.0), loads(scheme.tau))
    assert np.linalg.norm(system_residual(ops10, system, np.asarray(s1))) <= NewtonConfig().abs_tol
    assert s1.report.iterations >= 1


def test_theta_step_residual_below_tolerance(ops10):
    p = example1_spec(1.5, 0.01)
    mesh = ops10.mesh
    loads = SourceLoads(p, mesh)
    scheme = ThetaScheme(0.3, 0.05)
    s0 = StateVector(initial_coefficients(p.u0, mesh), 0.0)
    s1 = first_step_nonlinear(s0, ops10, p, scheme, loads=loads)
    s2 = step_nonlinear(s1, s0, ops10, p, scheme, loads=loads)
    system = theta_step_system(ops10, scheme, np.asarray(s1), np.asarray(s0), loads(0.1), loads(0.05))
    assert np.linalg.norm(system_residual(ops10, system, np.asarray(s2))) <= NewtonConfig().abs_tol


def test_newton_quadratic_tail(ops10):
    # a large datum makes the nonlinearity matter, so Newton needs several iterations
    p = example2_spec(1.5, 0.1)
    mesh = ops10.mesh
    s0 = StateVector(1280.0 * initial_coefficients(p.u0, mesh), 0.0)
    s1 = first_step_nonlinear(s0, ops10, p, ThetaScheme(0.0, 0.2))
    r = s1.report.residual_norms
    assert s1.report.iterations >= 5
    tail = [(a, b) for a, b in zip(r, r[1:]) if a <= 1e-3 and b > 1e-14]
    assert tail
    assert all(b <= 10.0 * a * a for a, b in tail)


def test_newton_failure_carries_residual(ops10):
    p = example2_spec(1.5, 0.1)
    s0 = StateVector(1280.0 * initial_coefficients(p.u0, ops10.mesh), 0.0)
    with pytest.raises(NewtonDivergence) as info:
        first_step_nonlinear(s0, ops10, p, ThetaScheme(0.0, 0.2), NewtonConfig(max_iters=2))
    assert info.value.residual > 0
    assert info.value.report.iterations == 2


def test_linear_steps_match_direct_solve(ops10):
    # with c = 0 the step system is linear and Newton must land on the direct solution in one correction
    rng = np.random.default_rng(4)
    n = ops10.mesh.n_dofs
    u1, u2 = rng.normal(size=n), rng.normal(size=n)
    scheme = ThetaScheme(0.25, 0.1)
    z = np.zeros(n)
    s = theta_step_system(ops10, scheme, u1, u2, z, z, F1=z)
    from fracttm.timestep import StepSystem

    linear = StepSystem(s.a, s.b, 0.0, s.r)
    A = s.a * ops10.mass_matrix() + s.b * ops10.B_matrix()
    direct = np.linalg.solve(A, s.r)
    u, report = newton_solve(ops10, linear, u1, NewtonConfig(), get_solver(ops10))
    assert np.allclose(u, direct, atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.25, 0.5])
def test_linear_energy_is_non_increasing(ops10, theta):
    # f = 0, g = 0: the energy of consecutive levels cannot grow
    n = ops10.mesh.n_dofs
    z = np.zeros(n)
    scheme = ThetaScheme(theta, 0.05)
    solver = get_solver(ops10)
    u0 = np.random.default_rng(5).normal(size=n)
    s = first_step_system(ops10, scheme, u0, z, z, F0=z)
    us = [u0, solver.solve(s.a, s.b, s.r)]
    H = [energy_H(us[1], us[0], theta, ops10)]
    for _ in range(30):
        s = theta_step_system(ops10, scheme, us[-1], us[-2], z, z, F1=z)
        us.append(solver.solve(s.a, s.b, s.r))
        H.append(energy_H(us[-1], us[-2], theta, ops10))
    assert np.all(np.diff(H) <= 1e-13 * H[0])


def test_standard_fe_final_error_magnitude():
    p = example1_spec(1.5, 0.01)
    traj = run_standard_fe(p, DiscretizationConfig(10, 1.0 / 200.0, 0.0))
    err = error_l2(traj.final, p.exact, traj.opset.mesh, 1.0)
    assert 7.48e-5 / 2 <= err <= 7.48e-5 * 2
    assert len(traj.states) == 201
    assert traj.final.time_label == pytest.approx(1.0)
    assert traj.cpu_seconds > 0


def test_time_error_is_second_order():
    # fix a fine mesh and halve tau; the final-time difference to a tiny-step run shrinks ~4x
    p = example1_spec(1.5, 0.5)
    finals = {}
    for k in (5, 10, 80):
        finals[k] = np.asarray(run_standard_fe(p, DiscretizationConfig(8, 1.0 / k, 0.2)).final)
    e1 = np.abs(finals[5] - finals[80]).max()
    e2 = np.abs(finals[10] - finals[80]).max()
    assert 3.0 <= e1 / e2 <= 5.5
