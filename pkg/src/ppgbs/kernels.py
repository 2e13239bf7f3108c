"""Kernel backend selection: compiled extension if importable, numpy fallback otherwise.

Set PPGBS_PURE_PYTHON=1 to force the fallback (used by the parity tests and
the benchmark).
"""

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if os.environ.get("PPGBS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass


def backend_name():
    return BACKEND


def threshold_fourier_sums(p):
    p = np.ascontiguousarray(p, dtype=complex)
    return _impl.threshold_fourier_sums(p)


def threshold_fourier_sums_2d(pa, pb):
    pa = np.ascontiguousarray(pa, dtype=complex)
    pb = np.ascontiguousarray(pb, dtype=complex)
    return _impl.threshold_fourier_sums_2d(pa, pb)


def hafnian(a):
    a = np.ascontiguousarray(a, dtype=complex)
    return complex(_impl.hafnian(a))
