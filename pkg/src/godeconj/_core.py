"""Select the compiled kernels or the numpy fallback at import time.

Set the environment variable ``GODECONJ_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
rk4_products = _fallback.rk4_products
projected_scans = _fallback.projected_scans
linear_scan = _fallback.linear_scan

if os.environ.get("GODECONJ_PURE", "0") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        rk4_products = _kernels.rk4_products
        projected_scans = _kernels.projected_scans
        linear_scan = _kernels.linear_scan
