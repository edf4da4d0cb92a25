from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # build without the compiled core; pure-Python fallback is used
    pass
else:
    ext_modules = cythonize(
        [Extension("fogmimo._ckernels", ["src/fogmimo/_ckernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
