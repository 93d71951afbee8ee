"""Kernel selection for the ARMA innovations filter.

The compiled Cython kernel is used when it was built and
``GRIDGDP_PURE_PYTHON`` is not set; otherwise the numpy version runs.
"""

import os

from . import _kalman_py

BACKEND = "python"
arma_whiten = _kalman_py.arma_whiten

if not os.environ.get("GRIDGDP_PURE_PYTHON"):
    try:
        from . import _kalman_ext
    except ImportError:
        pass
    else:
        arma_whiten = _kalman_ext.arma_whiten
        BACKEND = "cython"

__all__ = ["arma_whiten", "BACKEND"]
