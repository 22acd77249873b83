"""Build script for the optional compiled kernel core.

The extension is optional: when it cannot be built the package falls back
to the numpy implementation in ``bdprecode.numkernel._fallback``.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "bdprecode.numkernel._core",
                ["src/bdprecode/numkernel/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
