"""Finite-alphabet covering-lemma and multiterminal rate-distortion laboratory."""

__version__ = "0.1.0"
