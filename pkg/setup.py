"""Build script for the optional compiled orbit kernel.

The package is fully functional without the extension (a pure-Python
kernel is selected at import time), so a failed compile only degrades
performance.  -ffp-contract=off keeps the compiled kernel bit-identical
to the pure backend: both must evaluate the same Horner scheme with
plain IEEE multiply/add, no FMA contraction.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "petallab.kernels._core",
                ["src/petallab/kernels/_core.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
