"""Build script: compiles the accumulation kernels when Cython is available.

Without Cython (or without a C compiler) the package installs as pure Python
and falls back to the numpy kernels at import.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing: keep the pure-Python install
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); using numpy fallback")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension("ghostscatter._accumulate", ["src/ghostscatter/_accumulate.pyx"],
                    extra_compile_args=["-O2", "-fno-fast-math", "-ffp-contract=off"])
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
