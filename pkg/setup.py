"""Build script: compiles the optional C hashing kernel.

The extension links against libcrypto for SHA-256. If Cython or the
toolchain is unavailable (or MERKCERT_PURE_PYTHON=1 is set), the package
installs without it and falls back to the pure-Python kernel at import.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MERKCERT_PURE_PYTHON", "") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "merkcert._native",
            ["src/merkcert/_native.pyx"],
            libraries=["crypto"],
            extra_compile_args=["-O3"],
            define_macros=[("OPENSSL_SUPPRESS_DEPRECATED", "1")],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        pass

setup(ext_modules=ext_modules)
