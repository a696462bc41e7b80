import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernel is optional: without Cython the package installs with
# the pure-numpy fallback selected at import time.
extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "qmaze._kernels",
                ["src/qmaze/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-march=native"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
