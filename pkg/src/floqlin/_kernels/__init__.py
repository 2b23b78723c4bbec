"""Backend selection for the ensemble stepping kernels.

The compiled Cython extension is preferred when present; the pure-numpy
fallback is used otherwise.  Set ``FLOQLIN_PURE_PY=1`` to force the
fallback (useful for benchmarking and debugging).
"""

import os

from . import fallback

if os.environ.get("FLOQLIN_PURE_PY"):
    _impl = fallback
else:
    try:
        from . import _sde as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = fallback

pp_chunk = _impl.pp_chunk
theta_c1_chunk = _impl.theta_c1_chunk


def backend_name():
    """Name of the active kernel backend ("cython" or "numpy")."""
    return _impl.NAME


def available_backends():
    """All importable backends, keyed by name."""
    out = {fallback.NAME: fallback}
    try:
        from . import _sde  # type: ignore[attr-defined]

        out[_sde.NAME] = _sde
    except ImportError:
        pass
    return out
