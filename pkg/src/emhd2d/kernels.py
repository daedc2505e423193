"""Kernel selection: compiled core when importable, numpy fallback otherwise.

Set ``EMHD2D_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("EMHD2D_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

linear_coefficients = _impl.linear_coefficients
propagate = _impl.propagate
decay_sums = _impl.decay_sums

__all__ = ["BACKEND", "linear_coefficients", "propagate", "decay_sums"]
