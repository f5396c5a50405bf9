"""Build hook for the optional compiled pricing core.

The package is fully functional without the extension (pricing falls back to
the pure-Python twin), so any failure to cythonize degrades to a plain build
instead of aborting the install.
"""

import os

from setuptools import Extension, setup

PYX = os.path.join("src", "boxpolicy", "_pricing_core.pyx")

extensions = []
if os.path.exists(PYX):
    try:
        import numpy
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "boxpolicy._pricing_core",
                    [PYX],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=extensions)
