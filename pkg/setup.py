"""Build script for the optional compiled Jacobi kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the dense eigensolves much
faster.  Compile in place with:

    python setup.py build_ext --inplace

Set QCMLAB_SKIP_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Try to build the extension, fall back to pure Python on any failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled Jacobi kernel not built ({exc}); "
              "the NumPy fallback will be used")


def _extensions():
    if os.environ.get("QCMLAB_SKIP_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension("qcmlab._jacobi_cy", ["src/qcmlab/_jacobi_cy.pyx"])
    return cythonize(
        ext,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
