"""Build script for the optional C accelerator.

The package is fully functional without the extension: kgprep._kernels
falls back to the pure-Python implementation when kgprep._speedups is
missing, so a failed compile only costs speed.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/kgprep/_speedups.pyx"],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
