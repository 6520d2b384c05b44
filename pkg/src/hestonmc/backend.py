"""Backend selection: compiled Cython kernels when available, pure-python
(numpy) fallback otherwise.

Set HESTONMC_PURE_PYTHON=1 to force the fallback (used by the benchmark
script to compare both).
"""

from __future__ import annotations

import os

from . import _batch_py

_FORCE_PY = os.environ.get("HESTONMC_PURE_PYTHON", "") not in ("", "0")

try:
    from . import _core  # type: ignore[attr-defined]
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build environment
    _core = None
    HAVE_COMPILED = False

_active = _core if (HAVE_COMPILED and not _FORCE_PY) else _batch_py

BACKEND_NAME: str = _active.BACKEND_NAME


def get_backend(name: str | None = None):
    """Module implementing discretised_batch / exact_batch.

    name: None for the active default, "compiled" or "python" to force one.
    """
    if name is None:
        return _active
    if name == "python":
        return _batch_py
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled backend is not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")
