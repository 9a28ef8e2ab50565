"""Select the compiled kernels when available, else the numpy fallback.

Set ``GRAPHSSL_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("GRAPHSSL_PURE_PYTHON"):
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND = "python"

fixed_point = kernels.fixed_point
row_products = kernels.row_products
