"""Backend selection for the hot kernels.

The compiled extension is used when importable. Setting the environment
variable ``HKFACE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HKFACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

RCOND = 1e-10


def _u8(mask):
    return np.ascontiguousarray(mask, dtype=bool).view(np.uint8)


def smooth_masked(depth, valid, kernel, impl=None):
    impl = impl or _impl
    return impl.smooth_masked(
        np.ascontiguousarray(depth, dtype=np.float64),
        _u8(valid) if impl is not _pykernels else np.asarray(valid, dtype=bool),
        np.ascontiguousarray(kernel, dtype=np.float64),
    )


def fit_field(depth, valid, half_width, pitch=1.0, rcond=RCOND, impl=None):
    impl = impl or _impl
    return impl.fit_field(
        np.ascontiguousarray(depth, dtype=np.float64),
        _u8(valid) if impl is not _pykernels else np.asarray(valid, dtype=bool),
        int(half_width), float(pitch), float(rcond),
    )


def rasterize(x, y, z, tris, height, width, impl=None):
    impl = impl or _impl
    return impl.rasterize(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(tris, dtype=np.int64).reshape(-1, 3),
        int(height), int(width),
    )


def available_backends():
    """Modules implementing the kernel API, keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
