"""Build hook for the optional compiled flow kernel.

The pure-Python tracer is used whenever the extension is missing, so a
failed or skipped compile still yields a working install.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CHIRALKIT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension(
                "chiralkit.flow._kernels",
                ["src/chiralkit/flow/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
