"""Parity learning with noise: quantum-circuit simulation, learning loops,
closed-form error models, classical baselines, and an experiment harness."""

__version__ = "0.1.0"

from .bitcore import BitString, RngStream, dot, hamming, xor

__all__ = ["BitString", "RngStream", "dot", "hamming", "xor", "__version__"]
