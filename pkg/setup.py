"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and runs on
the NumPy fallback.
"""
import os

from setuptools import setup


def _extensions():
    if os.environ.get("MLR_EM_NO_EXT") == "1":
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "mlr_em._ckernels",
        ["src/mlr_em/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=_extensions())
