"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure numpy/scipy fallback is
selected at import time), so a failed compile should not block installation.
Set HYBRIDCORR_SKIP_EXTENSION=1 to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HYBRIDCORR_SKIP_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        # -ffp-contract=off: the compiled kernels must be bitwise identical
        # to the pure-Python fallback, so FMA contraction is disabled.
        ext_modules = cythonize(
            [
                Extension(
                    "hybridcorr._kernels",
                    ["src/hybridcorr/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
