from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "nicholson_lab._core",
                ["src/nicholson_lab/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # no Cython: install pure-Python only, the package falls back at import
    extensions = []

setup(ext_modules=extensions)
