"""Hot-kernel dispatch: numba-jitted loops or a pure-numpy fallback.

The backend is chosen once at import from the ``CORNSPECT_BACKEND``
environment variable (``numba`` or ``numpy``). Unset, it defaults to
numba when importable and falls back to numpy otherwise. Both backends
produce bit-identical results; ``benchmarks/bench_kernels.py`` compares
their speed.
"""

import logging
import os

from . import numpy_impl

logger = logging.getLogger(__name__)

_VALID = ("numba", "numpy")


def _resolve_backend():
    requested = os.environ.get("CORNSPECT_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ValueError(
            f"CORNSPECT_BACKEND={requested!r} is not recognized; use one of {_VALID}"
        )
    if requested == "numpy":
        return "numpy", numpy_impl
    try:
        from . import numba_impl
    except ImportError:
        if requested == "numba":
            raise
        logger.warning("numba unavailable, falling back to pure-numpy kernels")
        return "numpy", numpy_impl
    return "numba", numba_impl


_name, _impl = _resolve_backend()


def backend_name():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _name


def use_backend(name):
    """Re-bind the kernel table at runtime (test and benchmark hook)."""
    global _name, _impl
    if name == "numpy":
        _name, _impl = "numpy", numpy_impl
    elif name == "numba":
        from . import numba_impl

        _name, _impl = "numba", numba_impl
    else:
        raise ValueError(f"unknown backend {name!r}; use one of {_VALID}")


def im2col(x, kh, kw, sh, sw, out_h, out_w):
    return _impl.im2col(x, kh, kw, sh, sw, out_h, out_w)


def col2im(cols, c, hp, wp, kh, kw, sh, sw, out_h, out_w):
    return _impl.col2im(cols, c, hp, wp, kh, kw, sh, sw, out_h, out_w)


def maxpool2x2_forward(x):
    return _impl.maxpool2x2_forward(x)


def maxpool2x2_backward(grad_out, argmax, h, w):
    return _impl.maxpool2x2_backward(grad_out, argmax, h, w)


def label_components(mask):
    return _impl.label_components(mask)
