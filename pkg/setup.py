"""Build script for the optional compiled ADMM kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "harmonic_mpc.socp._kernel",
                sources=["src/harmonic_mpc/socp/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except Exception as exc:  # pragma: no cover - build environments without cython
    print(f"warning: skipping compiled kernel ({exc}); pure-python backend will be used")
    extensions = []

setup(ext_modules=extensions)
