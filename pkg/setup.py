"""Build the optional Cython sampling kernels.

The package works without them; ``qmemcap.kernels`` falls back to the
numpy implementation when the extension is not importable.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "qmemcap._kernels",
                ["src/qmemcap/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
