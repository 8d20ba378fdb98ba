"""Build script for the compiled kernel extension.

The extension is optional at runtime: uodkit.kernels falls back to the
pure numpy/scipy implementations when the compiled module is missing or
when UODKIT_PURE_PYTHON=1 is set.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        name="uodkit.kernels._compiled",
        sources=["src/uodkit/kernels/_compiled.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
