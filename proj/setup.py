from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

core_sources = [
    "src/uncertain_models.cpp",
    "src/network.cpp",
    "src/signals.cpp",
    "src/learning.cpp",
    "src/analysis.cpp",
    "src/harness.cpp",
]

ext = Pybind11Extension(
    "ulrsim._core",
    sources=["bindings/module.cpp"] + core_sources,
    include_dirs=["include", "vendor"],
    cxx_std=20,
    extra_compile_args=["-pthread"],
    extra_link_args=["-pthread"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
