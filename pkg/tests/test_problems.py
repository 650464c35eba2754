import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracttm.fraccalc import numeric_rl_oracle
from fracttm.problems import (
    PROBLEMS,
    QUARTIC,
    SeparablePoly,
    UnsupportedProblemError,
    example1_spec,
    example2_spec,
    example3_spec,
    f_eval,
    f_prime,
    get_problem,
    manufactured_source,
)

from .oracles import QUARTIC_TRIPLE, frac_operator_oracle


def test_nonlinearity():
    assert f_eval(0.0) == 0.0 and f_eval(1.0) == 0.0 and f_eval(-1.0) == 0.0
    assert f_eval(2.0) == 6.0
    assert f_prime(0.0) == -1.0


def test_example1_exact_and_initial():
    p = example1_spec(1.5, 0.01)
    assert p.exact(0.5, 0.5, 0.0) == pytest.approx(0.00390625, abs=1e-16)
    x, y = np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 9))
    assert np.array_equal(p.exact(x, y, 0.0), p.u0(x, y))
    assert np.all(p.u0(x, np.zeros_like(x)) == 0) and np.all(p.u0(np.ones_like(x), y) == 0)
    assert p.mu == 0.75


def test_example2_shares_initial_datum():
    x, y = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 5))
    assert np.array_equal(example2_spec(1.5).u0(x, y), example1_spec(1.5, 0.01).u0(x, y))
    assert example2_spec(1.5).source_is_zero
    assert np.all(example2_spec(1.5).source(x, y, 0.3) == 0)


def test_example3_branches_meet():
    p = example3_spec(1.8)
    y = np.linspace(0, 1, 11)
    assert np.allclose(p.u0(0.5, y), 7.0 / 64.0 * y * (1 - y), atol=1e-16)
    assert np.allclose(p.u0(0.5 + 1e-12, y), p.u0(0.5, y), atol=1e-12)
    assert p.exact is None


def test_registry():
    assert set(PROBLEMS) == {"example1", "example2", "example3"}
    assert get_problem("example2", 1.3, 0.05).epsilon == 0.05
    with pytest.raises(ValueError):
        get_problem("example9", 1.5, 0.1)


def test_separable_poly_guards():
    with pytest.raises(UnsupportedProblemError):
        SeparablePoly((0.0, 1.0, -1.0))
    assert QUARTIC.mirrored_coeffs() == pytest.approx(QUARTIC.coeffs)


def test_poly_fractional_derivatives_match_oracle():
    for mu in (0.55, 0.8):
        for x in (0.2, 0.7):
            v = numeric_rl_oracle(QUARTIC_TRIPLE[0], mu, 0.0, x, df=QUARTIC_TRIPLE[1])
            assert float(QUARTIC.left_deriv(mu, x)) == pytest.approx(v, abs=1e-9)
            vr = numeric_rl_oracle(QUARTIC_TRIPLE[0], mu, 1.0, x, df=QUARTIC_TRIPLE[1], side="right")
            assert float(QUARTIC.right_deriv(mu, x)) == pytest.approx(vr, abs=1e-9)


def test_source_at_centre_matches_oracle():
    p = example1_spec(1.5, 0.01)
    u = p.exact(0.5, 0.5, 0.0)
    L = frac_operator_oracle(QUARTIC_TRIPLE, QUARTIC_TRIPLE, 1.5, 0.5, 0.5)
    g = u + f_eval(u) - 0.01**2 * L
    assert float(p.source(0.5, 0.5, 0.0)) == pytest.approx(g, abs=1e-7)


def test_manufactured_closure_at_random_points():
    rng = np.random.default_rng(7)
    alpha, eps = 1.5, 0.3
    p = example1_spec(alpha, eps)
    for x, y, t in rng.uniform([0.02, 0.02, 0.0], [0.98, 0.98, 1.0], size=(20, 3)):
        u = float(p.exact(x, y, t))
        L = math.exp(t) * frac_operator_oracle(QUARTIC_TRIPLE, QUARTIC_TRIPLE, alpha, x, y)
        residual = u - eps**2 * L + f_eval(u) - float(p.source(x, y, t))
        assert abs(residual) <= 1e-7


def test_source_symmetry_and_eps_zero():
    p = example1_spec(1.7, 0.2)
    x, y = np.meshgrid(np.linspace(0.05, 0.95, 7), np.linspace(0.1, 0.9, 5))
    assert np.allclose(p.source(x, y, 0.4), p.source(1 - x, y, 0.4), atol=1e-13)
    assert np.allclose(p.source(x, y, 0.4), p.source(y, x, 0.4), atol=1e-13)
    g0 = manufactured_source(p.exact, 1.7, 0.0)
    assert np.allclose(g0(x, y, 0.4), p.exact(x, y, 0.4) ** 3, atol=1e-15)
    with pytest.raises(UnsupportedProblemError):
        manufactured_source(lambda x, y, t: x, 1.5, 0.1)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(1.05, 1.95), x=st.floats(0.01, 0.99), y=st.floats(0.01, 0.99), t=st.floats(0, 1))
def test_cached_spatial_parts_reproduce_source(alpha, x, y, t):
    src = example1_spec(alpha, 0.1).source
    assert src.combine(src.spatial_parts(x, y), t) == pytest.approx(float(src(x, y, t)), rel=1e-14, abs=1e-16)
    # the closed-form operator is symmetric under x -> 1 - x
    e = src.exact
    assert float(e.frac_operator(alpha, x, y, t)) == pytest.approx(float(e.frac_operator(alpha, 1 - x, y, t)),
                                                                   rel=1e-9, abs=1e-12)
