"""Statevector kernel backend selection.

The compiled Cython extension is used when available; otherwise the NumPy
fallback. Set QAOA_INIT_PURE_PYTHON=1 to force the fallback regardless.
"""

import os

from . import _np_kernels

if os.environ.get("QAOA_INIT_PURE_PYTHON") == "1":
    _impl = _np_kernels
else:
    try:
        from . import _cy_kernels as _impl
    except ImportError:
        _impl = _np_kernels

ACTIVE = _impl.BACKEND

phase_multiply = _impl.phase_multiply
phase_multiply_lut = _impl.phase_multiply_lut
mixer_apply = _impl.mixer_apply
mixer_apply_single = _impl.mixer_apply_single
mixer_ham_apply = _impl.mixer_ham_apply
expectation = _impl.expectation
weighted_im_dot = _impl.weighted_im_dot
im_dot = _impl.im_dot


def available_backends():
    """Backends importable in this environment, compiled one first."""
    backends = []
    try:
        from . import _cy_kernels

        backends.append(_cy_kernels)
    except ImportError:
        pass
    backends.append(_np_kernels)
    return backends
