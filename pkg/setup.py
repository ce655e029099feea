import os
import platform
import sys

from setuptools import Extension, setup


def _kernel_flags():
    """Vectorizable transcendental loops need fast-math and glibc's libmvec."""
    if sys.platform != "linux" or platform.machine() not in ("x86_64", "AMD64"):
        return ["-O3"], []
    compile_args = ["-O3", "-ffast-math"]
    if os.environ.get("RIDABLE_PORTABLE", "") != "1":
        compile_args.append("-march=native")
    return compile_args, ["-lmvec"]


try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; ridable.kernels falls back to numpy
    ext_modules = []
else:
    cflags, lflags = _kernel_flags()
    ext_modules = cythonize(
        [Extension("ridable._kernels", ["src/ridable/_kernels.pyx"],
                   extra_compile_args=cflags, extra_link_args=lflags)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
