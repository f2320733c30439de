from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernel.py falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "squidjpa._ckernel",
                ["src/squidjpa/_ckernel.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
