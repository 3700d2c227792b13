"""Builds the optional compiled feature-extraction kernel.

The package works without the extension (pure-Python fallback is selected at
import), so build failures here should not block installation of the rest.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/cvrptw/_speedups.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
