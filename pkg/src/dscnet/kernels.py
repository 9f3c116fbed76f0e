"""Kernel lane selection.

The simplex pivot and the max-flow inner loops dominate runtime, so they come
in two interchangeable implementations: a Cython extension (`_speedups`) and
a pure numpy/scipy lane (`_pykern`).  The compiled lane is preferred when it
imports; set DSCNET_FORCE_PURE=1 to force the fallback (used by the tests and
the benchmark to compare both).
"""

import os

from . import _pykern

BACKEND = "pure"
pivot_update = _pykern.pivot_update
dinic_maxflow = _pykern.dinic_maxflow

if os.environ.get("DSCNET_FORCE_PURE", "") != "1":
    try:
        from . import _speedups

        pivot_update = _speedups.pivot_update
        dinic_maxflow = _speedups.dinic_maxflow
        BACKEND = "compiled"
    except ImportError:
        pass


def backend_info():
    """Name of the active lane, for logging and benchmark output."""
    return BACKEND
