"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``MDCLT_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

BACKEND = "python"

if os.environ.get("MDCLT_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import rect_counts, replicate_uniforms
else:
    try:
        from ._kernels import rect_counts, replicate_uniforms

        BACKEND = "cython"
    except ImportError:  # pragma: no cover
        from ._kernels_py import rect_counts, replicate_uniforms

__all__ = ["BACKEND", "rect_counts", "replicate_uniforms"]
