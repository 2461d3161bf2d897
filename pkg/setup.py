import os

import numpy as np
from setuptools import Extension, setup

# Set PDQEVAL_NO_EXT=1 to install without compiling; the package then runs
# on its numpy kernels.
ext_modules = []
if not os.environ.get("PDQEVAL_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pdqeval._ckernels",
                ["src/pdqeval/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
