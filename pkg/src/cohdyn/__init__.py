"""Coherence spreading under symmetry-constrained many-body dynamics."""

__version__ = "0.1.0"
