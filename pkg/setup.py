"""Build script for the optional compiled DP core.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the chain recursions much faster.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "stagecrf._dp_c",
                ["src/stagecrf/_dp_c.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
