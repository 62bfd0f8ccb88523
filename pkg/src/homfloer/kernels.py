"""Kernel selection: compiled core when available, numpy fallback otherwise.

Set ``HOMFLOER_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the parity tests).
"""

from __future__ import annotations

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

LINEAR = _pykernels.LINEAR
STANDARD = _pykernels.STANDARD
CUBIC_HENON = _pykernels.CUBIC_HENON
PENDULUM_VERLET = _pykernels.PENDULUM_VERLET

_compiled = None
if not os.environ.get("HOMFLOER_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable; using numpy fallback")

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels

iterate = _impl.iterate
segment_pairs = _impl.segment_pairs
crossing_mask = _pykernels.crossing_mask
step = _pykernels.step
