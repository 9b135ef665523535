"""Simulator for a QD and a chirally coupled three-level atom in a two-mode ring cavity."""

from .core_model import SystemParams, build_basis, build_liouvillian

__version__ = "0.1.0"

__all__ = ["SystemParams", "build_basis", "build_liouvillian", "__version__"]
