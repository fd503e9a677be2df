"""Robust Lindbladian tomography.

Estimates the generator errors ``dL_i`` of a gate set from QPT data on error
amplification circuits (EACs), using first-order perturbation maps of matrix
exponentials to build a linear model that is insensitive to SPAM errors.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("rlt")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

__all__ = ["__version__"]
