"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
module is loaded. Set ``INTEROP_LENS_PURE=1`` to force the fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("INTEROP_LENS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND = _active.BACKEND
all_pairs_dijkstra = _active.all_pairs_dijkstra
mixture_cdf = _active.mixture_cdf
mixture_quantiles = _active.mixture_quantiles
demean_two_way = _active.demean_two_way

__all__ = [
    "BACKEND",
    "all_pairs_dijkstra",
    "compiled_backend",
    "demean_two_way",
    "mixture_cdf",
    "mixture_quantiles",
    "python_backend",
]
