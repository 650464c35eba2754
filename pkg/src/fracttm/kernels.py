"""Backend selection for the quadrature kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is.  Set ``FRACTTM_KERNELS=python`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("FRACTTM_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

cell_quad_values = _impl.cell_quad_values
quad_load = _impl.quad_load
quad_mass_stencil = _impl.quad_mass_stencil
stencil_apply = _impl.stencil_apply
allen_cahn_terms = _impl.allen_cahn_terms

GAUSS_X = _kernels_py.GAUSS_X
GAUSS_W = _kernels_py.GAUSS_W
SHAPE = _kernels_py.SHAPE


def backend(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _kernels_py
    from . import _kernels

    return _kernels
