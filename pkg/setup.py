"""Build script: compiles the optional accelerated solver kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any compilation failure downgrades to a
pure-Python install instead of aborting.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernel if possible, warn and continue otherwise."""

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
        print(
            f"WARNING: building the accelerated kernel failed ({exc}); "
            "falling back to the pure-Python solver.",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "WARNING: Cython not available; installing without the "
            "accelerated solver kernel.",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "clusterlasso._solver_kernel",
        sources=["src/clusterlasso/_solver_kernel.pyx"],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
