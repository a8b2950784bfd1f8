"""SEAQT and Lindblad simulation of superconducting-qubit decoherence experiments."""

__version__ = "0.1.0"
