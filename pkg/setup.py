"""Builds the optional compiled kernels.

The package is fully functional without them (a numpy fallback is selected
at import); build in place with:

    python setup.py build_ext --inplace

The tree kernels compile with plain -O3 (their arithmetic must match the
numpy fallback bitwise); the convolution kernels get aggressive FP flags.
If -march=native is rejected by the compiler, rerun with
HYBRIDPD_PORTABLE=1 to drop it.
"""
import os

import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    conv_flags = ["-O3", "-ffast-math"]
    if not os.environ.get("HYBRIDPD_PORTABLE"):
        conv_flags.append("-march=native")
    extensions = cythonize(
        [
            Extension(
                "hybridpd.kernels._ckernels",
                ["src/hybridpd/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            ),
            Extension(
                "hybridpd.kernels._cconv",
                ["src/hybridpd/kernels/_cconv.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=conv_flags,
            ),
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
