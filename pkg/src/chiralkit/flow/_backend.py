"""Pick the compiled tracer when it imports, else the pure-Python one.

Set CHIRALKIT_BACKEND=python to force the fallback.
"""
import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": _pykernels.trace}
if _compiled is not None:
    _KERNELS["compiled"] = _compiled.trace

_requested = os.environ.get("CHIRALKIT_BACKEND", "").strip().lower()
if _requested and _requested not in _KERNELS:
    raise ImportError(f"CHIRALKIT_BACKEND={_requested!r} unavailable; have {sorted(_KERNELS)}")
BACKEND = _requested or ("compiled" if "compiled" in _KERNELS else "python")


def available_backends() -> list[str]:
    return sorted(_KERNELS)


def get_kernel(name: str | None = None):
    return _KERNELS[name or BACKEND]
