import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "randwg._kernels",
                ["src/randwg/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Pure-python fallback kernels are selected at import time, so the
    # package still works without Cython.
    extensions = []

setup(ext_modules=extensions)
