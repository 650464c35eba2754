# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``; same layouts, same results."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double GX[3]
cdef double GW[3]
cdef double SH[2][3]

GX[0] = 0.5 - 0.5 * np.sqrt(0.6)
GX[1] = 0.5
GX[2] = 0.5 + 0.5 * np.sqrt(0.6)
GW[0] = 5.0 / 18.0
GW[1] = 8.0 / 18.0
GW[2] = 5.0 / 18.0
for _q in range(3):
    SH[0][_q] = 1.0 - GX[_q]
    SH[1][_q] = GX[_q]


cdef inline void _cell_values(const double[:, ::1] Up, Py_ssize_t l, Py_ssize_t k,
                              double q[3][3]) noexcept nogil:
    cdef double u00 = Up[l, k], u01 = Up[l, k + 1], u10 = Up[l + 1, k], u11 = Up[l + 1, k + 1]
    cdef int a, b
    for b in range(3):
        for a in range(3):
            q[b][a] = (SH[0][b] * (SH[0][a] * u00 + SH[1][a] * u01)
                       + SH[1][b] * (SH[0][a] * u10 + SH[1][a] * u11))


cdef inline void _scatter_load(double[:, ::1] F, Py_ssize_t l, Py_ssize_t k,
                               double v[3][3], double jac) noexcept nogil:
    cdef int s, r, a, b
    cdef double acc
    for s in range(2):
        for r in range(2):
            acc = 0.0
            for b in range(3):
                for a in range(3):
                    acc += GW[b] * GW[a] * SH[s][b] * SH[r][a] * v[b][a]
            F[l + s, k + r] += jac * acc


cdef inline void _scatter_mass(double[:, :, :, ::1] S, Py_ssize_t l, Py_ssize_t k,
                               double w[3][3], double jac) noexcept nogil:
    cdef int s, r, t, u, a, b
    cdef double acc, wq
    for s in range(2):
        for r in range(2):
            for t in range(2):
                for u in range(2):
                    acc = 0.0
                    for b in range(3):
                        for a in range(3):
                            wq = GW[b] * GW[a] * w[b][a]
                            acc += wq * SH[s][b] * SH[t][b] * SH[r][a] * SH[u][a]
                    S[t - s + 1, u - r + 1, l + s, k + r] += jac * acc


def cell_quad_values(double[:, ::1] Up):
    cdef Py_ssize_t ny = Up.shape[0] - 1, nx = Up.shape[1] - 1, l, k
    cdef int a, b
    cdef double q[3][3]
    out = np.empty((ny, nx, 3, 3))
    cdef double[:, :, :, ::1] Q = out
    with nogil:
        for l in range(ny):
            for k in range(nx):
                _cell_values(Up, l, k, q)
                for b in range(3):
                    for a in range(3):
                        Q[l, k, b, a] = q[b][a]
    return out


def quad_load(double[:, :, :, ::1] Q, double hx, double hy):
    cdef Py_ssize_t ny = Q.shape[0], nx = Q.shape[1], l, k
    cdef int a, b
    cdef double v[3][3]
    out = np.zeros((ny + 1, nx + 1))
    cdef double[:, ::1] F = out
    with nogil:
        for l in range(ny):
            for k in range(nx):
                for b in range(3):
                    for a in range(3):
                        v[b][a] = Q[l, k, b, a]
                _scatter_load(F, l, k, v, hx * hy)
    return out


def quad_mass_stencil(double[:, :, :, ::1] W, double hx, double hy):
    cdef Py_ssize_t ny = W.shape[0], nx = W.shape[1], l, k
    cdef int a, b
    cdef double w[3][3]
    out = np.zeros((3, 3, ny + 1, nx + 1))
    cdef double[:, :, :, ::1] S = out
    with nogil:
        for l in range(ny):
            for k in range(nx):
                for b in range(3):
                    for a in range(3):
                        w[b][a] = W[l, k, b, a]
                _scatter_mass(S, l, k, w, hx * hy)
    return out


def stencil_apply(double[:, :, :, ::1] S, double[:, ::1] Up):
    cdef Py_ssize_t ny = Up.shape[0] - 1, nx = Up.shape[1] - 1, j, i
    cdef int dy, dx
    cdef double acc
    out = np.empty((ny - 1, nx - 1))
    cdef double[:, ::1] O = out
    with nogil:
        for j in range(1, ny):
            for i in range(1, nx):
                acc = 0.0
                for dy in range(3):
                    for dx in range(3):
                        acc += S[dy, dx, j, i] * Up[j + dy - 1, i + dx - 1]
                O[j - 1, i - 1] = acc
    return out


def allen_cahn_terms(double[:, ::1] Up, double hx, double hy, bint jacobian):
    """Fused pass: load of ``u^3 - u`` and stencil weighted by ``3u^2 - 1``."""
    cdef Py_ssize_t ny = Up.shape[0] - 1, nx = Up.shape[1] - 1, l, k
    cdef int a, b
    cdef double q[3][3]
    cdef double fv[3][3]
    cdef double dv[3][3]
    cdef double jac = hx * hy, u
    fout = np.zeros((ny + 1, nx + 1))
    cdef double[:, ::1] F = fout
    cdef double[:, :, :, ::1] S
    sout = None
    if jacobian:
        sout = np.zeros((3, 3, ny + 1, nx + 1))
        S = sout
    with nogil:
        for l in range(ny):
            for k in range(nx):
                _cell_values(Up, l, k, q)
                for b in range(3):
                    for a in range(3):
                        u = q[b][a]
                        fv[b][a] = u * u * u - u
                        dv[b][a] = 3.0 * u * u - 1.0
                _scatter_load(F, l, k, fv, jac)
                if jacobian:
                    _scatter_mass(S, l, k, dv, jac)
    return fout, sout
