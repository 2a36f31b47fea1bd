import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled stencil kernels bit-compatible with
# the numpy fallback (no fused multiply-add reassociation).
extensions = [
    Extension(
        "regcomplex._kernels._core",
        sources=["src/regcomplex/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
)
