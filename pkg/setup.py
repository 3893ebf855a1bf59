from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the numpy fallback covers a missing compiler toolchain
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "hkface._ckernels",
                ["src/hkface/_ckernels.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
