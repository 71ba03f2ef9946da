"""Build hook for the optional compiled kernels.

The extension is built when Cython and numpy are importable. Without them
the package installs in pure-Python mode and ``godeconj._core`` falls back
to the numpy implementations.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [Extension("godeconj._kernels", ["src/godeconj/_kernels.pyx"],
                   include_dirs=[numpy.get_include()],
                   extra_compile_args=["-O3"],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
