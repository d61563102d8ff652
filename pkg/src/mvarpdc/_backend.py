"""Select the compiled kernels or the numpy fallback at import time.

``MVARPDC_PURE_PYTHON=1`` in the environment forces the fallback.
"""
import os

import numpy as np

from . import _fallback

STATUS_CONVERGED = _fallback.STATUS_CONVERGED
STATUS_MAX_ITERS = _fallback.STATUS_MAX_ITERS
STATUS_NOT_PD = _fallback.STATUS_NOT_PD
STATUS_NONFINITE = _fallback.STATUS_NONFINITE

_kernels = None
if not os.environ.get("MVARPDC_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:
        _kernels = None

if _kernels is not None:
    BACKEND = "compiled"
    sbl_em = _kernels.sbl_em
    simulate_var = _kernels.simulate_var
else:
    BACKEND = "python"
    sbl_em = _fallback.sbl_em
    simulate_var = _fallback.simulate_var


def packed_outer(phi):
    """Upper triangles of the row outer products, shape (N, M(M+1)/2)."""
    iu, ju = np.triu_indices(phi.shape[1])
    return np.ascontiguousarray(phi[:, iu] * phi[:, ju])
