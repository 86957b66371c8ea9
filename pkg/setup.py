"""Build hook for the optional compiled kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a missing Cython or C compiler only costs speed.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    if not os.path.exists("src/rtmplan/kernels/_core.pyx"):
        raise ImportError
    ext_modules = cythonize(
        [
            Extension(
                "rtmplan.kernels._core",
                ["src/rtmplan/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
