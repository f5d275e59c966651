"""Orbit kernel backend selection.

The compiled Cython kernel is preferred; the pure-Python twin is used
when the extension is unavailable or PETALLAB_PURE_PYTHON is set.  Both
implement the same contract and produce bitwise-identical orbits.
"""

import os

from . import _pure

EXIT_MAX_STEPS = _pure.EXIT_MAX_STEPS
EXIT_CONVERGED = _pure.EXIT_CONVERGED
EXIT_LEFT_BALL = _pure.EXIT_LEFT_BALL
EXIT_NONFINITE = _pure.EXIT_NONFINITE

if os.environ.get("PETALLAB_PURE_PYTHON"):
    _backend = _pure
    COMPILED = False
else:
    try:
        from . import _core as _backend  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        _backend = _pure
        COMPILED = False


def backend_name() -> str:
    return "compiled" if COMPILED else "pure"


def get_backend(name=None):
    """Return the named backend module ('compiled', 'pure' or None=active)."""
    if name is None:
        return _backend
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _core  # raises ImportError when not built

        return _core
    raise ValueError(f"unknown backend {name!r}")


def eval_map(cx, cy, x, y):
    return _backend.eval_map(cx, cy, x, y)


def run_orbit(cx, cy, x0, y0, max_steps, radius2, conv_tol2, xs, ys):
    return _backend.run_orbit(cx, cy, x0, y0, max_steps, radius2, conv_tol2, xs, ys)
