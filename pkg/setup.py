"""Builds the compiled selection kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any build failure here is non-fatal: install with
BEAMSCHED_SKIP_EXT=1 to force the pure-Python wheel.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("BEAMSCHED_SKIP_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "beamsched._qcore",
        ["src/beamsched/_qcore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
