import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cellscope._core",
                sources=["src/cellscope/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: install pure-Python only, the kernel backend
    # falls back to the numpy implementation at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
