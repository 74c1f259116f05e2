from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python fallback is used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "gdnls._ckernels",
                ["src/gdnls/_ckernels.pyx"],
                extra_compile_args=["-O3", "-fno-fast-math", "-fcx-limited-range"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
