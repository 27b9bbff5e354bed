"""Build hook for the optional compiled kernel extension.

The package works without the extension (a pure numpy twin is selected
at import time), so any failure here degrades to a source-only install
instead of breaking it.  Contraction is disabled so compiled
multiply-adds round exactly like numpy's two-step equivalents.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sknap._kernels_cy",
                ["src/sknap/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O2", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
