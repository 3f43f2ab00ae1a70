"""Thread-local scratch buffers for per-frame hot loops.

Large temporaries (quantized images, co-occurrence codes, render buffers)
allocated fresh for every frame fall into the allocator's mmap range, and
the resulting page-fault traffic dominates the actual arithmetic.  Reusing
one buffer per (key, shape) per thread removes that cost while keeping
frame-level parallelism safe: buffers never escape the computation that
borrowed them.
"""

from __future__ import annotations

import threading

import numpy as np

_local = threading.local()


def scratch(key: tuple, shape: tuple[int, ...], dtype) -> np.ndarray:
    """Return a reusable uninitialized array for (key, shape, dtype)."""
    bufs = getattr(_local, "bufs", None)
    if bufs is None:
        bufs = _local.bufs = {}
    full_key = (key, dtype)
    buf = bufs.get(full_key)
    if buf is None or buf.shape != shape:
        buf = bufs[full_key] = np.empty(shape, dtype)
    return buf
