import os

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

# PARMIMO_NO_EXT=1 skips the compiled core; the package then runs on the
# pure-Python kernels in parmimo._fallback.
extensions = []
if not os.environ.get("PARMIMO_NO_EXT"):
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "parmimo._kernels",
                sources=["src/parmimo/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
