"""Kernel selection: compiled extension when available, pure Python otherwise.

Set KGPREP_PURE_PYTHON=1 to force the fallback (useful for benchmarking
the two implementations against each other).
"""

from __future__ import annotations

import os

from kgprep import _native

if os.environ.get("KGPREP_PURE_PYTHON"):
    _impl = _native
else:
    try:
        from kgprep import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _native

BACKEND = _impl.BACKEND
normalize_text = _impl.normalize_text
find_token_spans = _impl.find_token_spans


def set_backend(name: str) -> None:
    """Swap the active implementation ("c" or "python") at runtime.

    Intended for tests and benchmarks; raises ImportError if "c" is
    requested but the extension was not built.
    """
    global _impl, BACKEND, normalize_text, find_token_spans
    if name == "python":
        mod = _native
    elif name == "c":
        from kgprep import _speedups as mod  # noqa: PLC0415
    else:
        raise ValueError(f"unknown kernel backend: {name!r}")
    _impl = mod
    BACKEND = mod.BACKEND
    normalize_text = mod.normalize_text
    find_token_spans = mod.find_token_spans
