"""Kernel backend selection: compiled extension if importable, numpy otherwise.

Set ``GPL_PURE_PYTHON=1`` to force the numpy kernels.
"""
import importlib
import os

from . import _kernels_py


def load(name: str | None = None):
    """Return the kernel module for ``name`` ('cython', 'python' or None = best)."""
    if name == "python":
        return _kernels_py
    if name in (None, "cython"):
        try:
            return importlib.import_module("gabor_lattice._ckernels")
        except ImportError:
            if name == "cython":
                raise
    return _kernels_py


kernels = load("python" if os.environ.get("GPL_PURE_PYTHON") else None)
BACKEND = kernels.NAME


def available() -> list[str]:
    out = ["python"]
    try:
        load("cython")
        out.append("cython")
    except ImportError:
        pass
    return out
