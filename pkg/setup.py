import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

# MIMO_EE_NO_EXT=1 skips the compiled core; the package then runs on the
# pure-Python kernels.
extensions = []
if USE_CYTHON and not os.environ.get("MIMO_EE_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "mimo_ee._ckernels",
                ["src/mimo_ee/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
