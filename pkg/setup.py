"""Build the optional Cython search kernels.

The package works without them: ``twostep._backend`` falls back to the
pure-Python kernels when the extension cannot be imported. Set
``TWOSTEP_NO_EXT=1`` to skip compilation entirely.
"""
import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TWOSTEP_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "twostep._ckernels",
                    ["src/twostep/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    # scores must match the Python kernels bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
