"""Kernel backend selection: compiled extension if built, numpy fallback.

Set BEAMSCHED_BACKEND=pure to force the fallback (e.g. for benchmarking) or
BEAMSCHED_BACKEND=compiled to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import _qcore_py

_requested = os.environ.get("BEAMSCHED_BACKEND", "auto").strip().lower()

if _requested in ("auto", "", "compiled"):
    try:
        from . import _qcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "BEAMSCHED_BACKEND=compiled but the extension is not built; "
                "reinstall without BEAMSCHED_SKIP_EXT"
            )
        _impl = _qcore_py
elif _requested in ("pure", "python", "pure-python"):
    _impl = _qcore_py
else:
    raise ValueError(f"unknown BEAMSCHED_BACKEND value: {_requested!r}")

q_of_set = _impl.q_of_set
greedy_core = _impl.greedy_core
COMPILED = bool(_impl.COMPILED)


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"


def available_backends() -> dict:
    """Name -> kernel module, for benchmarks and cross-checks."""
    out = {"pure-python": _qcore_py}
    try:
        from . import _qcore  # type: ignore[attr-defined]

        out["compiled"] = _qcore
    except ImportError:
        pass
    return out
