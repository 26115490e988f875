"""Build script: compiles the optional hot-kernel extension.

The package is fully functional without the extension (numpy fallbacks are
selected at import), so any compiler or Cython failure downgrades to a
pure-python install instead of breaking it.  Set MANIFLOW_SKIP_EXT=1 to
skip the extension build outright.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing: fall back to pure python
            print(f"maniflow: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"maniflow: skipping {ext.name} ({exc})")


ext_modules = []
cmdclass = {}
if os.environ.get("MANIFLOW_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "maniflow.kernels._core",
                    sources=["src/maniflow/kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )
        cmdclass = {"build_ext": OptionalBuildExt}
    except Exception as exc:
        print(f"maniflow: Cython unavailable, pure-python install ({exc})")

setup(ext_modules=ext_modules, cmdclass=cmdclass)
