"""Hot inner loops with two interchangeable backends.

The numba backend is used when numba imports cleanly, unless the
environment variable ``BOHMLAB_DISABLE_NUMBA`` is set to a truthy value,
in which case the pure-numpy implementation is used.  Both expose the
same functions with identical signatures:

``advance_1d`` / ``advance_2d``
    One frame interval of RK4 trajectory integration for a whole ensemble.
``field_1d`` / ``field_2d``
    Interpolated density and current at a batch of points.
``kick_phase``
    Multiply a 2D state by ``exp(1j * a * pi_x[i] * y[j])``.

``BOHMLAB_NUM_THREADS`` caps the numba thread pool.
"""

import os

from . import _numpy

_TRUE = {"1", "true", "yes", "on"}


def _want_numba():
    return os.environ.get("BOHMLAB_DISABLE_NUMBA", "").strip().lower() not in _TRUE


def load_backend(name=None):
    """Return the kernel module for ``name`` ("numba" or "numpy").

    With ``name=None`` the environment decides.
    """
    if name is None:
        name = "numba" if _want_numba() else "numpy"
    if name == "numpy":
        return _numpy
    if name != "numba":
        raise ValueError(f"unknown kernel backend {name!r}")
    from . import _numba

    threads = os.environ.get("BOHMLAB_NUM_THREADS")
    if threads:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    return _numba


try:
    backend = load_backend()
except ImportError:  # numba missing or broken
    backend = _numpy

BACKEND_NAME = backend.NAME
