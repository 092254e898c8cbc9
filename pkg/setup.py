"""Build hook for the optional compiled kernel.

The package works without it: ``circform._kernels`` falls back to the
pure-Python twin when the extension is missing.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CIRCFORM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "circform._kernels._ckernel",
                    ["src/circform/_kernels/_ckernel.pyx"],
                    # keep results bit-identical to the Python twin: no sin/cos
                    # fusion into sincos, no fused multiply-add contraction
                    extra_compile_args=["-O2", "-fno-builtin-sin", "-fno-builtin-cos", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
