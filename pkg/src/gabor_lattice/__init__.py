"""Gabor phase retrieval from lattice spectrogram samples."""
from ._backend import BACKEND

__all__ = ["BACKEND", "__version__"]

__version__ = "0.1.0"
