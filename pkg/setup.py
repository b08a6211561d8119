"""Build the compiled Jacobi core; the package still imports without it."""

from __future__ import annotations

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FRAMEWARD_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("frameward.kernels._jacobi", ["src/frameward/kernels/_jacobi.pyx"],
                       libraries=["mpfr", "gmp"], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
