import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "swarmfo._ckernel",
        ["src/swarmfo/_ckernel.pyx"],
        include_dirs=[np.get_include()],
        # no fused multiply-add: keeps results identical to the Python paths
        extra_compile_args=["-O3", "-ffp-contract=off"],
        # a failed compile leaves the numpy fallback in charge
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
