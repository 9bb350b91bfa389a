"""Kernel backend selection.

The numeric hot loops (the bounded-variable simplex and its batched
drivers) are written once in array style and compiled with numba when
available.  Setting ``LDR2S_BACKEND=numpy`` forces the interpreted
pure-numpy path; ``LDR2S_BACKEND=numba`` requires numba and fails loudly
if it cannot be imported.  The default is numba when importable.
"""

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only on stripped installs
    _numba = None

_requested = os.environ.get("LDR2S_BACKEND", "").strip().lower()

if _requested in ("", "auto"):
    BACKEND = "numba" if _numba is not None else "numpy"
elif _requested in ("numba", "jit"):
    if _numba is None:
        raise ImportError("LDR2S_BACKEND=numba but numba is not importable")
    BACKEND = "numba"
elif _requested in ("numpy", "python"):
    BACKEND = "numpy"
else:
    raise ValueError(f"unrecognized LDR2S_BACKEND={_requested!r}")


def njit(func=None, **kwargs):
    """Compile ``func`` with numba when the numba backend is active.

    Under the numpy backend this is an identity decorator, so the same
    source runs interpreted (slow, but bit-for-bit the same algorithm).
    """
    if BACKEND == "numpy":
        if func is not None:
            return func
        return lambda f: f
    opts = dict(cache=True, fastmath=False)
    opts.update(kwargs)
    if func is not None:
        return _numba.njit(func, **opts)
    return _numba.njit(**opts)
