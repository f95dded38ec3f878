# Builds the compiled kernel backend. The package still works without it:
# spatialnn.kernels falls back to the numpy implementation at import time.
import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "spatialnn.kernels._ckernels",
        ["src/spatialnn/kernels/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
