import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracttm import kernels
from fracttm.kernels import backend

py = backend("python")
try:
    cy = backend("cython")
except ImportError:  # pragma: no cover - depends on the build
    cy = None

needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")
    if cy is not None:
        assert kernels.BACKEND == "cython"


def test_gauss_rule_integrates_quintics():
    for p in range(6):
        assert np.dot(kernels.GAUSS_W, kernels.GAUSS_X**p) == pytest.approx(1.0 / (p + 1), rel=1e-14)


def _fields(nx, ny, seed):
    rng = np.random.default_rng(seed)
    Up = np.zeros((ny + 1, nx + 1))
    Up[1:-1, 1:-1] = rng.uniform(-1.5, 1.5, (ny - 1, nx - 1))
    Q = rng.uniform(-1, 1, (ny, nx, 3, 3))
    S = rng.uniform(-1, 1, (3, 3, ny + 1, nx + 1))
    return Up, Q, S


@needs_cython
@settings(max_examples=20, deadline=None)
@given(nx=st.integers(2, 9), ny=st.integers(2, 9), seed=st.integers(0, 2**31))
def test_backends_agree(nx, ny, seed):
    Up, Q, S = _fields(nx, ny, seed)
    hx, hy = 1.0 / nx, 1.0 / ny
    assert np.allclose(py.cell_quad_values(Up), cy.cell_quad_values(Up), atol=1e-14)
    assert np.allclose(py.quad_load(Q, hx, hy), cy.quad_load(Q, hx, hy), atol=1e-15)
    assert np.allclose(py.quad_mass_stencil(Q, hx, hy), cy.quad_mass_stencil(Q, hx, hy), atol=1e-15)
    assert np.allclose(py.stencil_apply(S, Up), cy.stencil_apply(S, Up), atol=1e-14)
    for jac in (True, False):
        Fp, Sp = py.allen_cahn_terms(Up, hx, hy, jac)
        Fc, Sc = cy.allen_cahn_terms(Up, hx, hy, jac)
        assert np.allclose(Fp, Fc, atol=1e-15)
        if jac:
            assert np.allclose(Sp, Sc, atol=1e-15)


def test_allen_cahn_load_matches_quadrature_of_f():
    Up, _, _ = _fields(5, 4, 0)
    Q = py.cell_quad_values(Up)
    F, S = kernels.allen_cahn_terms(Up, 0.2, 0.25, True)
    assert np.allclose(F, py.quad_load(Q**3 - Q, 0.2, 0.25), atol=1e-15)
    assert np.allclose(S, py.quad_mass_stencil(3 * Q**2 - 1, 0.2, 0.25), atol=1e-15)
