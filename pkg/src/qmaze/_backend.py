"""Selects the propagation kernel implementation at import time.

Prefers the compiled Cython extension; falls back to the pure-numpy module.
Set QMAZE_KERNEL=python to force the fallback (used by the benchmark and the
backend-equivalence tests).
"""

import os

_forced = os.environ.get("QMAZE_KERNEL", "").lower()

if _forced in ("py", "python", "numpy"):
    from . import _kernels_py as _impl

    BACKEND = "python"
elif _forced in ("", "auto", "c", "cython"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _forced in ("c", "cython"):
            raise
        from . import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"
else:
    raise ValueError(f"unrecognized QMAZE_KERNEL value: {_forced!r}")

lindblad_rhs = _impl.lindblad_rhs
rk4_evolve = _impl.rk4_evolve
