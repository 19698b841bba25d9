"""Build script: compiles the optional C kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set EMLLM_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("EMLLM_SKIP_EXT", "0") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "emllm.nn._ckernels",
                    ["src/emllm/nn/_ckernels.pyx"],
                    # -ffp-contract=off: forbid fused multiply-add so the
                    # compiled kernels round exactly like the pure-Python
                    # reference (one rounding per multiply, one per add).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("Cython not available; building without the compiled kernel extension")

setup(ext_modules=ext_modules)
