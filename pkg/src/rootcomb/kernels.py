"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
implementation is loaded. Set ``ROOTCOMB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from rootcomb import _pykernels

if os.environ.get("ROOTCOMB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from rootcomb import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
rasterize_strand = _impl.rasterize_strand
trace_direction = _impl.trace_direction
plane_hypotheses = _impl.plane_hypotheses


def available_backends():
    """Name -> module for every backend importable in this environment."""
    out = {"python": _pykernels}
    try:
        from rootcomb import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
