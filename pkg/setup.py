"""Build script for the optional compiled kernels.

The package works without the extension (a pure numpy/scipy lane is selected
at import time), so a failed extension build degrades gracefully instead of
blocking installation.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dscnet._speedups",
                ["src/dscnet/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"dscnet: skipping compiled kernels ({exc}); pure lane will be used")
    ext_modules = []

setup(ext_modules=ext_modules)
