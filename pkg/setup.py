"""Build glue for the optional compiled DSP kernel.

The compressor inner loop is shipped both as a Cython extension and as a
pure-Python fallback; the extension is marked optional so a missing or
broken C toolchain degrades to the slow path instead of failing the
install.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "automix._kernels",
                ["src/automix/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
