"""JIT switch for the numeric kernels.

Kernels are written in the subset of numpy that numba compiles, so the same
function body serves as the pure-numpy fallback.  Set ``AMPC_DISABLE_NUMBA=1``
to run everything uncompiled (useful for debugging and for the kernel
benchmark).
"""
import os

_FLAG = os.environ.get("AMPC_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

NUMBA_ENABLED = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def kernel(fn):
    """Compile ``fn`` with ``numba.njit`` unless JIT is disabled."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend():
    return "numba" if NUMBA_ENABLED else "numpy"
