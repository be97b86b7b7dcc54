"""Pick the compiled kernels when available, else the pure-Python twin.

``TWOSTEP_BACKEND=python`` forces the fallback.
"""
import logging
import os

from twostep import _pykernels

log = logging.getLogger(__name__)

try:
    from twostep import _ckernels
except ImportError:  # extension not built
    _ckernels = None

AVAILABLE = {"python": _pykernels}
if _ckernels is not None:
    AVAILABLE["cython"] = _ckernels

_requested = os.environ.get("TWOSTEP_BACKEND", "").strip().lower()
if _requested and _requested not in AVAILABLE:
    log.warning("backend %r unavailable, using %s", _requested,
                "cython" if _ckernels is not None else "python")
    _requested = ""
BACKEND = _requested or ("cython" if _ckernels is not None else "python")


def get(name=None):
    """Return ``(name, module)`` for ``name`` or the default backend."""
    name = name or BACKEND
    try:
        return name, AVAILABLE[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have {sorted(AVAILABLE)})") from None
