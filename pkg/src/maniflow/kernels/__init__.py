"""Hot-kernel backend selection.

The compiled extension (:mod:`maniflow.kernels._core`, Cython) provides the
circle enumeration and the periodic PDE stepper; importing it can fail on
installs without a C toolchain, in which case the numpy fallback in
:mod:`maniflow.kernels._pure` is used.  Set ``MANIFLOW_PURE=1`` to force
the fallback.  ``backend_name()`` reports which one is active.
"""

import os

from . import _pure
from ._pure import SCHEME_EXP, SCHEME_PROJ, SCHEME_STEREO

_FORCE_PURE = os.environ.get("MANIFLOW_PURE", "").strip() in ("1", "true", "yes")

if not _FORCE_PURE:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        _core = None
else:
    _core = None

_active = _core if _core is not None else _pure

circle_enumeration = _active.circle_enumeration
pde_rk4 = _active.pde_rk4


def backend_name() -> str:
    return "compiled" if _active is not _pure else "pure"


def backends():
    """(name, module) pairs for every importable backend (for benchmarks)."""
    out = [("pure", _pure)]
    if _core is not None:
        out.append(("compiled", _core))
    return out


__all__ = [
    "SCHEME_EXP",
    "SCHEME_PROJ",
    "SCHEME_STEREO",
    "backend_name",
    "backends",
    "circle_enumeration",
    "pde_rk4",
]
