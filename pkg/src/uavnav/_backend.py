"""Select the compiled kernels when available.

Set ``UAVNAV_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("UAVNAV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        _impl = _compiled

predict_covariance = _impl.predict_covariance
kalman_update = _impl.kalman_update
inject_error = _impl.inject_error
VARIANT_CODES = _kernels_py.VARIANT_CODES
