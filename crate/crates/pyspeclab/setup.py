"""Builds the extension by delegating to cargo; no maturin dependency.

The cdylib lands in the workspace target/ directory and is copied to
wherever setuptools expects the extension module.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

WORKSPACE = Path(__file__).resolve().parents[2]


class CargoBuild(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "speclab-py"],
            cwd=WORKSPACE,
            check=True,
        )
        if sys.platform == "darwin":
            built = WORKSPACE / "target" / "release" / "libspeclab_py.dylib"
        elif sys.platform == "win32":
            built = WORKSPACE / "target" / "release" / "speclab_py.dll"
        else:
            built = WORKSPACE / "target" / "release" / "libspeclab_py.so"
        out = Path(self.get_ext_fullpath(ext.name))
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, out)


setup(
    ext_modules=[Extension("speclab_py", sources=[])],
    cmdclass={"build_ext": CargoBuild},
)
