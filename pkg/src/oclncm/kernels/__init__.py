"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when it has been built; setting the
environment variable OCLNCM_PURE=1 forces the numpy fallback. `BACKEND`
reports which implementation is active ("cython" or "numpy").
"""

import os

if os.environ.get("OCLNCM_PURE"):
    from oclncm.kernels import pure as _impl
else:
    try:
        from oclncm.kernels import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        from oclncm.kernels import pure as _impl

BACKEND = _impl.BACKEND
mean_update_chunk = _impl.mean_update_chunk
sq_dist_chunk = _impl.sq_dist_chunk

__all__ = ["BACKEND", "mean_update_chunk", "sq_dist_chunk"]
