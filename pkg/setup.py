"""Build script with optional Cython acceleration.

The compiled kernels are a pure optimization: if Cython or a C compiler is
unavailable the package installs anyway and falls back to the Python kernels
at import time. Set HARDNET_SKIP_CYTHON=1 to force a pure-Python install.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HARDNET_SKIP_CYTHON", "0") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hardnet.kernels._ckernels",
                    ["src/hardnet/kernels/_ckernels.pyx"],
                    # contraction off: float64 results must be bit-identical
                    # to the pure-Python reference summation
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
