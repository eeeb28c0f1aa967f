"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; the pure numpy
fallback is selected otherwise, or when the EVTM_PURE environment variable
is set to a non-empty value.  Both backends expose the same two functions
(``synthesize_events_kernel``, ``fit_tubes_kernel``) with identical
semantics; see benchmarks/bench_kernels.py for the speed comparison.
"""

import os

from . import pure

if os.environ.get("EVTM_PURE"):
    backend = pure
    BACKEND = "pure"
else:
    try:
        from . import _speedups as backend

        BACKEND = "compiled"
    except ImportError:
        backend = pure
        BACKEND = "pure"

CROSSING_SLACK = pure.CROSSING_SLACK
