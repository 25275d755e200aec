"""Hot kernels with a compiled backend and a pure-Python fallback.

The selection happens at import time.  In the default ``auto`` mode the
compiled Cython module (when built) runs the CG solver, while element
matrices stay on the NumPy implementation: its batched GEMM goes through
BLAS and beats the compiled loop (see ``benchmarks/bench_kernels.py``).
:func:`use_backend` forces one backend for every kernel.
"""

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

CONVERGED = _pykernels.CONVERGED
MAXITER = _pykernels.MAXITER
BREAKDOWN = _pykernels.BREAKDOWN

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_KERNELS = ("element_matrices", "pcg")
_active = {}
_mode = "auto"


def available_backends():
    return sorted(_BACKENDS)


def backend(kernel=None):
    """Mode name, or the backend running ``kernel`` when given."""
    if kernel is None:
        return _mode
    return "compiled" if _active[kernel] is _ckernels else "python"


def use_backend(name):
    """Select ``'auto'``, ``'python'`` or ``'compiled'`` for all kernels."""
    global _mode
    if name == "auto":
        fast = _ckernels if _ckernels is not None else _pykernels
        _active.update(element_matrices=_pykernels, pcg=fast)
    elif name in _BACKENDS:
        _active.update({k: _BACKENDS[name] for k in _KERNELS})
    else:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _mode = name


def get_backend(name):
    return _BACKENDS[name]


def element_matrices(dphi, phi, ginv, wdet):
    c = np.ascontiguousarray
    return _active["element_matrices"].element_matrices(c(dphi, float), c(phi, float), c(ginv, float), c(wdet, float))


def pcg(indptr, indices, data, b, x0, rtol, maxiter):
    return _active["pcg"].pcg(indptr, indices, data, b, x0, rtol, maxiter)


use_backend("auto")
