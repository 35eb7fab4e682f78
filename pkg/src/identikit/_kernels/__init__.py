"""Hot RK4 kernels: compiled extension when built, pure-Python fallback otherwise.

Set ``IDENTIKIT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback as fallback

compiled = None
if os.environ.get("IDENTIKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _rk4 as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else fallback
BACKEND_NAME = "cython" if compiled is not None else "python"

operon = backend.operon
nine_state = backend.nine_state

__all__ = ["operon", "nine_state", "backend", "compiled", "fallback", "BACKEND_NAME"]
