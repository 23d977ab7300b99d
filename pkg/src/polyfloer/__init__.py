"""Spectral laboratory for polysymplectic Floer flows on the 2-torus."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
