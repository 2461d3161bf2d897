"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over. Setting ``PDQEVAL_PURE_PYTHON=1`` forces the numpy
path.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("PDQEVAL_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

bvn_cdf = _impl.bvn_cdf
bvn_cdf_grid = _impl.bvn_cdf_grid
region_sums = _impl.region_sums
background_table = _impl.background_table
pair_sums = _impl.pair_sums


def available_backends() -> dict:
    """Map backend name to kernel module for every backend that imports."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
