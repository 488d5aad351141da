"""Exact quench dynamics, entanglement and thermalization of small Bose-Hubbard chains."""

__version__ = "0.1.0"
