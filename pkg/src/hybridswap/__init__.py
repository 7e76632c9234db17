"""Hybrid DV/CV entanglement-swapping simulation in truncated Fock space."""

__version__ = "0.1.0"
