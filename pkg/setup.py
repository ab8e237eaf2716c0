"""Build script for the optional compiled LSTM kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); a failed native build therefore only costs speed.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, blas headers, ...
            print(f"homeseq: skipping native kernel build ({exc}); "
                  "the pure-numpy backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"homeseq: failed to build {ext.name} ({exc}); "
                  "the pure-numpy backend will be used")


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "homeseq._core",
        sources=["src/homeseq/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=make_extensions(), cmdclass={"build_ext": OptionalBuildExt})
