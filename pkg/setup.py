"""Builds the optional compiled kernel extension.

The package is fully functional without it: oclncm.kernels falls back to the
numpy implementations when the extension is absent or fails to build.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "oclncm.kernels._fast",
                ["src/oclncm/kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps the compiled kernels rounding-identical
                # to the numpy fallback (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
