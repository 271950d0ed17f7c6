import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CDSGEN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "cdsgen._substring_fast",
                    ["src/cdsgen/_substring_fast.pyx"],
                    language="c++",
                    extra_compile_args=["-O3", "-std=c++17"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
            },
        )
    except ImportError:
        # Pure-Python fallback in cdsgen._substring_py is used at runtime.
        ext_modules = []

setup(ext_modules=ext_modules)
