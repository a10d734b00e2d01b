"""Quantum-kernel and Lie-algebra autoencoders for dimensionality reduction."""

__version__ = "0.1.0"
