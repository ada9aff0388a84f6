import os

import numpy as np
from setuptools import Extension, setup

# VECSELNOISE_NO_EXT=1 builds the pure-Python package only.
ext_modules = []
if not os.environ.get("VECSELNOISE_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "vecselnoise._sweep",
                ["src/vecselnoise/_sweep.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fopenmp"],
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
