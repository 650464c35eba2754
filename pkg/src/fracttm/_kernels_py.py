"""Pure numpy implementations of the per-cell quadrature kernels.

Nodal fields are full ``(ny + 1, nx + 1)`` grids (boundary included, row
index = y).  Quadrature-point fields are ``(ny, nx, 3, 3)`` arrays indexed
``[cell_y, cell_x, q_y, q_x]``.  Stencils are ``(3, 3, ny + 1, nx + 1)`` arrays
where ``S[dy + 1, dx + 1, j, i]`` couples node ``(j, i)`` to ``(j + dy, i + dx)``.
"""
import numpy as np

GAUSS_X = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0
# SHAPE[s, q]: 1-D linear shape function s in {0, 1} at Gauss point q
SHAPE = np.stack([1.0 - GAUSS_X, GAUSS_X])

_LOAD = np.einsum("b,a,sb,ra->srba", GAUSS_W, GAUSS_W, SHAPE, SHAPE)
_MASS = np.einsum("srba,tb,ua->srtuba", _LOAD, SHAPE, SHAPE)


def cell_quad_values(Up):
    ny, nx = Up.shape[0] - 1, Up.shape[1] - 1
    Q = np.zeros((ny, nx, 3, 3))
    for s in (0, 1):
        for r in (0, 1):
            corner = Up[s:ny + s, r:nx + r]
            Q += corner[:, :, None, None] * np.multiply.outer(SHAPE[s], SHAPE[r])
    return Q


def quad_load(Q, hx, hy):
    ny, nx = Q.shape[:2]
    local = np.tensordot(Q, _LOAD, axes=([2, 3], [2, 3])) * (hx * hy)
    F = np.zeros((ny + 1, nx + 1))
    for s in (0, 1):
        for r in (0, 1):
            F[s:ny + s, r:nx + r] += local[:, :, s, r]
    return F


def quad_mass_stencil(W, hx, hy):
    ny, nx = W.shape[:2]
    local = np.tensordot(W, _MASS, axes=([2, 3], [4, 5])) * (hx * hy)
    S = np.zeros((3, 3, ny + 1, nx + 1))
    for s in (0, 1):
        for r in (0, 1):
            for t in (0, 1):
                for u in (0, 1):
                    S[t - s + 1, u - r + 1, s:ny + s, r:nx + r] += local[:, :, s, r, t, u]
    return S


def stencil_apply(S, Up):
    ny, nx = Up.shape[0] - 1, Up.shape[1] - 1
    out = np.zeros((ny - 1, nx - 1))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out += S[dy + 1, dx + 1, 1:ny, 1:nx] * Up[1 + dy:ny + dy, 1 + dx:nx + dx]
    return out


def allen_cahn_terms(Up, hx, hy, jacobian):
    """Load of ``u^3 - u`` and, optionally, the stencil weighted by ``3u^2 - 1``."""
    Q = cell_quad_values(Up)
    F = quad_load(Q * Q * Q - Q, hx, hy)
    S = quad_mass_stencil(3.0 * Q * Q - 1.0, hx, hy) if jacobian else None
    return F, S
